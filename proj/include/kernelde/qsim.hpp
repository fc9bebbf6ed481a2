#pragma once
// Exact simulation of circuits on n three-level sites {|0>, |1>, |L>}.
// |L> models an atom lost from its trap: gates act as identity on it and it
// reads out as "absent" (bit 1), indistinguishable from |1>.
//
// Two deterministic modes (pure statevector, density operator) plus seeded
// Monte Carlo trajectories that unravel stochastic Pauli/loss channels.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "kernelde/rng.hpp"

namespace kernelde::circuits {
struct Circuit;
}

namespace kernelde::qsim {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

inline constexpr int local_dim = 3;  // |0>, |1>, |L>
inline constexpr int max_pure_sites = 12;
inline constexpr int max_density_sites = 8;

// 3^n
long basis_dim(int n_sites);

// Site 0 is the most significant base-3 digit of a basis index.
int site_digit(long index, int site, int n_sites);

// ---------------------------------------------------------------------------
// State

struct QuditState {
    int n_sites = 0;
    bool density = false;
    Vec psi;  // pure mode, length 3^n
    Mat rho;  // density mode, 3^n x 3^n

    static QuditState pure_zero(int n_sites);
    static QuditState density_zero(int n_sites);

    // Throws std::runtime_error on a violated invariant (norm/trace/hermiticity;
    // positivity is only checked when `check_psd` is set, it costs an
    // eigendecomposition).
    void check_valid(double tol = 1e-10, bool check_psd = false) const;

    // population of |level> on one site (level 0, 1 or 2 = |L>)
    double site_population(int site, int level) const;
};

// ---------------------------------------------------------------------------
// Gates

enum class GateKind { RX, RY, RZ, Z, H, CZ, CNOT, SWAP, GlobalRX, GlobalH, GlobalZ };

struct Gate {
    GateKind kind;
    // Global kinds list every site the pulse hits (= the computation zone at
    // that instant); other single-site kinds have one target, two-site kinds
    // exactly two distinct targets. For CNOT, targets[0] is the control.
    std::vector<int> targets;
    double angle = 0.0;  // rotation kinds only
};

bool is_rotation_kind(GateKind k);
bool is_global_kind(GateKind k);
bool is_two_site_kind(GateKind k);
const char* kind_name(GateKind k);

// Unitaries on the qubit subspace. Embedding into the 3-level site adds an
// untouched |L> row/column.
Eigen::Matrix2cd qubit_unitary_1q(GateKind k, double angle);
Eigen::Matrix4cd qubit_unitary_2q(GateKind k);  // CZ, CNOT, SWAP
Eigen::Matrix3cd embed_1q(const Eigen::Matrix2cd& u);
Mat embed_2q(const Eigen::Matrix4cd& u);  // 9x9

// Apply a gate; targets must be in range and distinct. Works in both modes.
void apply_gate_inplace(QuditState& state, const Gate& g);
QuditState apply_gate(QuditState state, const Gate& g);

// Low-level single-site qubit-subspace application (|L> untouched), exposed
// for channel unraveling. `u` is the 2x2 qubit block.
void apply_1q_unitary(QuditState& state, int site, const Eigen::Matrix2cd& u);
void apply_2q_unitary(QuditState& state, int s0, int s1, const Eigen::Matrix4cd& u);

// ---------------------------------------------------------------------------
// Channels

struct KrausChannel {
    std::vector<int> targets;  // 1 or 2 sites
    std::vector<Mat> ops;      // Kraus operators, 3^k x 3^k over the targets

    // Trajectory unraveling. `general` channels run only in density mode.
    enum class Unravel { general, unitary_mixture, loss_jump };
    Unravel unravel = Unravel::general;
    std::vector<double> probs;  // unitary_mixture branch probabilities
    std::vector<Mat> branch_u;  // branch unitaries on the qubit subspace (2^k)
    double p_loss = 0.0;        // loss_jump

    // ch(rho) = sum_i p_i U_i rho U_i^+, with U_i given on the qubit subspace.
    static KrausChannel unitary_mixture(std::vector<int> targets,
                                        std::vector<std::pair<double, Mat>> branches);
    // Atom loss on one site: K0 = sqrt(1-p)(|0><0|+|1><1|) + |L><L|,
    // K1 = sqrt(p)|L><0|, K2 = sqrt(p)|L><1|.
    static KrausChannel loss(int site, double p);
    // Arbitrary Kraus set, full 3^k operators; rejected unless CPTP.
    static KrausChannel general(std::vector<int> targets, std::vector<Mat> ops);

    void check_cptp(double tol = 1e-9) const;  // throws if sum K^+K != I
};

void apply_channel_inplace(QuditState& state, const KrausChannel& ch);  // density mode
QuditState apply_channel(QuditState state, const KrausChannel& ch);

// One stochastic realization on a pure state; consumes draws from rs.
void apply_channel_trajectory(QuditState& state, const KrausChannel& ch, rng::Stream& rs);

// ---------------------------------------------------------------------------
// Readout

// Probabilities over readout records for the given sites (ascending order
// recommended). Record index: bit of sites[k] at position (m-1-k), i.e. the
// first listed site is the most significant record bit; "present" (|0>) -> 0,
// "absent" (|1> or |L>) -> 1.
Eigen::VectorXd readout_distribution(const QuditState& state, const std::vector<int>& sites);
// All sites, ascending.
Eigen::VectorXd measure_all(const QuditState& state);

// ---------------------------------------------------------------------------
// Circuit execution

// Apply instructions [begin, end) of the circuit (end = -1 means all) to the
// state. Measure instructions are ignored here; use readout_distribution.
void run_circuit(QuditState& state, const circuits::Circuit& c, int begin = 0, int end = -1);

struct Shot {
    std::uint32_t bits = 0;  // bit (m-1-k) = readout of k-th measured site
    std::uint32_t lost = 0;  // same positions; set when the site read out from |L>
    int n_measured = 0;

    int bit(int k) const { return (bits >> (n_measured - 1 - k)) & 1; }
    int lost_bit(int k) const { return (lost >> (n_measured - 1 - k)) & 1; }
    std::string str() const;  // "010011", measured sites in ascending order
};

// One Monte Carlo trajectory through the circuit; returns the readout record
// of the measured sites. Deterministic function of the stream state.
Shot run_trajectory(const circuits::Circuit& c, rng::Stream& rs);

// Convenience wrapper fixing the stream from a bare seed.
std::string sample_trajectory(const circuits::Circuit& c, std::uint64_t seed);

}  // namespace kernelde::qsim
