#pragma once
// [[4,2,2]] error-detecting code: stabilizers and logical operators, the
// flag-verified |00>_L preparation fragment, proxy-phased logical rotations,
// and postselected decoding of 6-site readout records.
//
// Site layout throughout: data 0..3, flag 4, rotation ancilla 5. Readout
// records follow the qsim convention (sites measured ascending, site k at
// record bit m-1-k), so a 6-site record reads d0 d1 d2 d3 flag anc from the
// high bit down.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kernelde/circuits.hpp"
#include "kernelde/qsim.hpp"

namespace kernelde::code422 {

// Pauli strings over the 4 data sites, site 0 first.
struct CodeSpec {
    std::string s_x, s_z;    // stabilizers
    std::string z_l1, z_l2;  // logical Z
    std::string x_l1, x_l2;  // logical X
};
CodeSpec code_spec();

// The two 4-bit data patterns (d0 = high bit) superposed in the codeword for
// logical bits (b1, b2).
std::pair<int, int> codeword_patterns(int b1, int b2);

// ---------------------------------------------------------------------------
// Circuit fragments

// Flag-verified GHZ-type preparation of |00>_L on 5 sites. Noiselessly the
// data sites end in (|0000> + |1111>)/sqrt(2) with the flag back in |0>; any
// single Pauli fault inside the fragment is flagged, breaks data parity, or
// acts trivially on the code space.
circuits::Circuit prepare_logical_00();

// exp(-i theta/2 X_L) through an ancilla: H on the ancilla, CNOTs onto the
// operator's support, RX(theta), uncompute. `targets` must be the support of
// a logical X operator (any of the six weight-2 data pairs); anything else
// throws. The window between compute and uncompute is not fault tolerant: an
// X fault on the ancilla there walks onto the data as a logical operator.
circuits::Circuit proxy_phase(const std::vector<int>& targets, double theta);

// ---------------------------------------------------------------------------
// Decoding

enum class Reject { none, flag, parity, loss_pattern };

struct DecodeResult {
    bool accepted = false;
    int b1 = 0, b2 = 0;  // valid when accepted
    Reject reject_reason = Reject::none;
};

// Postselected decode of one 6-bit record: reject when the flag fired, the
// rotation ancilla left its nominal 0, or the data parity is odd; otherwise
// b1 = d0^d1, b2 = d0^d2. Both ancilla conditions report Reject::flag, so
// the sequential accounting groups the ancilla checks into one stage. Throws
// on n_bits != 6.
DecodeResult decode(std::uint32_t record, int n_bits);

// Diagnostic overload: same decision from the shot's bits, but a rejected
// record that involved a lost atom reports Reject::loss_pattern. Bits-only
// decoding stays the normative path; hardware never sees loss directly.
DecodeResult decode(const qsim::Shot& shot);

struct PostselectionStats {
    double flag_reject_rate = 0.0;    // ancilla-stage rejects / total
    double parity_reject_rate = 0.0;  // parity rejects among the rest / total
    double total_discard_rate = 0.0;
    long accepted_count = 0;
};

// Sequential accounting over decode results (loss_pattern rejects count only
// toward the total). Throws on empty input.
PostselectionStats postselection_stats(const std::vector<DecodeResult>& results);

}  // namespace kernelde::code422
