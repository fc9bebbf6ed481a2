#pragma once
// Noise layer: Pauli/loss channel parameterization per operation class, chi
// matrices and Pauli twirling on the qubit subspace, deliberate error
// injection, and the decoration pass that turns an ideal circuit into a noisy
// one.
//
// Calibration lives in a NoiseModel (JSON-serializable, schema 1). Defaults
// encode the measured gate fidelities split into depolarizing / loss /
// coherent parts; the split fractions are assumptions, documented in the
// README and visible in the config they produce.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kernelde/circuits.hpp"
#include "kernelde/qsim.hpp"

namespace kernelde::noise {

// ---------------------------------------------------------------------------
// Pauli channels and chi matrices

// Probabilistic Pauli map on 1 or 2 qubit subspaces. Keys are "I","X","Y","Z"
// for arity 1 and "II".."ZZ" (first char = first target) for arity 2; the
// identity entry is included and the map sums to 1.
struct PauliChannel {
    int arity = 1;
    std::map<std::string, double> probs;

    // Fills the identity entry with 1 - sum(others).
    static PauliChannel from_error_probs(int arity,
                                         const std::map<std::string, double>& non_identity);

    double p_identity() const;
    double error_sum() const;  // 1 - p_identity
    void validate(double tol = 1e-12) const;
};

// Process matrix in the Pauli basis, 4^k x 4^k, index order I,X,Y,Z per site
// (site 0 = high index digit). Describes the channel's action restricted to
// the qubit subspace; leakage shows up as trace(chi) < 1.
struct ChiMatrix {
    int arity = 1;
    qsim::Mat entries;
};

// Pauli-basis label for chi index m ("Y", "IZ", ...).
std::string pauli_label(int arity, int index);
// 2^k unitary for a Pauli label.
qsim::Mat pauli_qubit_matrix(const std::string& label);

// Pauli channel as a stochastic-unitary Kraus channel on the given sites.
qsim::KrausChannel pauli_to_channel(const PauliChannel& pc, std::vector<int> targets);

// chi_{mn} = sum_K a_m(K) conj(a_n(K)) with K expanded in the Pauli basis of
// the qubit subspace. Arity follows ch.targets.
ChiMatrix channel_to_chi(const qsim::KrausChannel& ch);

// Diagonal of chi(ch composed with ideal^-1), renormalized over the qubit
// subspace (for a lossy channel this is the twirl conditioned on survival).
// Throws if a diagonal entry is below -1e-9 or the subspace weight vanishes.
PauliChannel pauli_twirl(const qsim::KrausChannel& ch, const qsim::Gate& ideal);

// ---------------------------------------------------------------------------
// Calibration model

// One operation class: Pauli map + per-participating-site loss + coherent
// rotation bias. The bias is a pulse-area miscalibration: rotation kinds
// pick up a sign-following angle offset, fixed-angle kinds are part of the
// calibrated set and ignore it; the CZ coherent term is the separate
// residual-phase knob below.
struct ClassParams {
    PauliChannel pauli;
    double loss = 0.0;
    double coherent_bias_rad = 0.0;

    bool trivial() const;
};

struct NoiseModel {
    ClassParams single_qubit_global;   // global Raman pulses (GRX/GH/GZ, local RX/RY/H)
    ClassParams single_qubit_local_z;  // tweezer light-shift gates (Z, RZ)
    ClassParams cz;                    // arity-2 Pauli map, loss is per atom
    ClassParams move;                  // the moved atom, per move instruction
    ClassParams idle;                  // every other atom during a move
    ClassParams state_prep;            // per site, once at circuit start
    ClassParams readout;               // per measured site, before measurement
    double cz_residual_phase_rad = 0.0;  // miscompensated Z after each CZ, per atom
    std::uint64_t seed = 1;

    void validate() const;
    std::string to_json() const;  // schema 1, stable field order
    static NoiseModel from_json(const std::string& text);
};

// Measured-fidelity defaults with the documented split assumptions.
NoiseModel default_noise_model();
// Everything switched off; decorating with it is the identity.
NoiseModel zero_noise_model();

// ---------------------------------------------------------------------------
// Error injection

// Copy of the circuit with `err` inserted before instruction `location`
// (location == instrs.size() appends). Throws std::out_of_range otherwise.
circuits::Circuit inject_error(const circuits::Circuit& c, int location, const qsim::Gate& err);

// One rotation per in-zone site at a named anchor, lowest site first.
// `kind` must be a rotation kind; R_{-Y}(theta) is RY with angle -theta.
circuits::Circuit inject_zone_rotation(const circuits::Circuit& c, const std::string& anchor,
                                       qsim::GateKind kind, double angle_rad);

// ---------------------------------------------------------------------------
// Decoration

// Noisy version of a circuit: state-prep channels at the head, a class
// channel after every gate (global pulses get one per target), move + idle
// channels per move, readout channels before each measurement. Coherent
// biases modify the gates themselves; the CZ residual phase rides along the
// CZ Pauli branches. Channels that would be exact no-ops are skipped, so a
// zero model returns the circuit unchanged.
circuits::Circuit apply_noise_model(const circuits::Circuit& c, const NoiseModel& m);

}  // namespace kernelde::noise
