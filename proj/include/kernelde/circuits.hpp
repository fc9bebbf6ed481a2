#pragma once
// Circuit representation with zone bookkeeping, builders for the ideal kernel
// circuit and its hardware-compiled physical/logical forms, and a compilation
// equivalence checker.
//
// Zone model: each site is either in the computation zone or in storage.
// Gates may only touch in-zone sites, and global pulses hit exactly the set of
// sites currently in the zone; MoveIn/MoveOut instructions toggle a site.

#include <map>
#include <string>
#include <vector>

#include "kernelde/qsim.hpp"

namespace kernelde::circuits {

enum class Zone { computation, storage };

struct Instruction {
    enum class Kind { gate, channel, move_in, move_out, measure };
    Kind kind;
    qsim::Gate gate;           // kind == gate
    qsim::KrausChannel chan;   // kind == channel
    int site = -1;             // move_in / move_out
    std::vector<int> sites;    // measure
    Zone zone = Zone::computation;  // annotation (dump only)

    static Instruction make_gate(qsim::Gate g);
    static Instruction make_channel(qsim::KrausChannel ch);
    static Instruction make_move_in(int site);
    static Instruction make_move_out(int site);
    static Instruction make_measure(std::vector<int> sites);
};

struct Circuit {
    int n_sites = 0;
    std::vector<bool> start_in_zone;  // per site
    std::vector<Instruction> instrs;
    // Named landmarks: anchor value = instruction index at which an injected
    // gate would be inserted ("after X" anchors point just past X).
    std::map<std::string, int> anchors;

    // Zone discipline, target ranges, measure-at-the-end. Throws on violation.
    void validate() const;

    // In-zone mask immediately before instruction `index` (index == instrs.size()
    // gives the final mask).
    std::vector<bool> zone_mask_at(int index) const;

    // Measured sites (union over measure instructions), ascending.
    std::vector<int> measured_sites() const;

    // Plain-text debug dump, one instruction per line:
    //   IDX KIND TARGETS ANGLE ZONE
    std::string dump() const;
};

// True when the circuit uses only the native set: global rotations/H/Z, local
// Z, CZ (+ moves, measures, channels).
bool native_conformant(const Circuit& c);

// (alpha, beta, gamma) = 2*pi*(x^2, x - a, -a^2)
struct KernelParams {
    double x, a;
    double alpha, beta, gamma;
};
KernelParams kernel_params(double x, double a);

// --- ideal (uncompiled) builders -------------------------------------------

// U(x) = RX(2*pi*x) . CNOT . RX(2*pi*x^2) on 2 sites, plus measurement.
Circuit build_u(double x);

// Full overlap circuit U(a)^+ U(x) |00>, uncompiled (CNOT form); p00 = kernel.
Circuit build_u_dagger_u(double x, double a);

// Uncompiled encoded kernel circuit on 6 sites (4 data + flag 4 + rotation
// ancilla 5): flagged |00>_L preparation, three proxy-phased rotations with
// the encoded SWAP in between, measurement of everything.
Circuit build_logical_kernel_reference(double x, double a);

// --- compiled builders (native set, zoned, as run on hardware) -------------

Circuit build_physical_kernel(double x, double a);  // 2 sites
Circuit build_logical_kernel(double x, double a);   // 6 sites

// --- equivalence ------------------------------------------------------------

struct CompilationReport {
    double max_deviation = 0.0;  // max |Delta P| over readout records
};

// Compare noiseless readout distributions of two circuits over the same
// measured record space (global phase irrelevant by construction).
CompilationReport verify_compilation(const Circuit& compiled, const Circuit& reference);

}  // namespace kernelde::circuits
