#pragma once
// Kernel estimation pipeline. Runs the physical or logical kernel circuit
// under a noise model, turns readout records into kernel-value estimates
// (with postselection in logical mode), sweeps (x, a) grids into curves, and
// quantifies how far a noisy curve sits from the closed form after the best
// affine correction.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kernelde/noise.hpp"

namespace kernelde::kernel {

enum class Mode { ideal, physical, logical };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);  // throws std::invalid_argument

// kappa(x, a) = cos^2(pi (x - a)) cos^2(pi (x^2 - a^2))
double closed_form(double x, double a);

// Shot accounting. `shots_requested` counts raw trajectories fired at the
// simulator; `shots_accepted` counts the records that enter the estimate. The
// two differ only in logical mode, where sampling continues until the target
// number of records survives postselection, so requested grows with the
// discard rate while accepted stays pinned at the target.
struct EstimateStats {
    long shots_requested = 0;
    long shots_accepted = 0;
    double flag_reject_rate = 0.0;    // logical mode, fraction of raw shots
    double parity_reject_rate = 0.0;  // ditto
    double total_discard_rate = 0.0;  // includes loss-implicated rejects
};

struct Estimate {
    double kappa = 0.0;
    EstimateStats stats;
};

// Ideal mode returns the closed form directly. Physical mode reports the
// fraction of "00" records over `shots` trajectories. Logical mode samples
// until `shots` records pass the flag/ancilla and parity checks and reports
// the fraction of those decoding to logical 00; if the target is still not
// met after 100x oversampling (acceptance below 1%) the run aborts with a
// std::runtime_error describing the operating point.
Estimate estimate_kernel(Mode mode, double x, double a, long shots,
                         const noise::NoiseModel& m, std::uint64_t seed);

struct KernelCurve {
    Mode mode = Mode::ideal;
    double a = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<long> shots_requested;
    std::vector<long> shots_accepted;
};

std::vector<double> default_grid();     // 41 uniform points on [0, 1]
std::vector<double> default_centers();  // {0.25, 0.5, 0.75}

// One curve per center. Every grid point draws from its own counter-based
// stream keyed on (seed, point index), so the result is a pure function of
// (seed, centers, grid, shots) no matter how the points are scheduled.
std::vector<KernelCurve> sweep_curves(Mode mode, const std::vector<double>& centers,
                                      const std::vector<double>& grid, long shots,
                                      const noise::NoiseModel& m, std::uint64_t seed);

// Best affine correction of an estimated curve against the closed form on the
// curve's own grid: (scale, shift) minimize RMSE(scale * value + shift,
// ideal). A constant curve cannot identify the scale; the fit then fixes
// scale = 1, solves for the shift alone, and clears `scale_identifiable`.
struct DistortionReport {
    double rmse_after_rescale = 0.0;
    double scale = 1.0;
    double shift = 0.0;
    bool scale_identifiable = true;
};

DistortionReport distortion(const KernelCurve& curve);  // needs >= 3 points

// Header `mode,a,x,kappa,shots_requested,shots_accepted`, one row per grid
// point, floats printed with 9 significant digits.
void write_curves_csv(std::ostream& os, const std::vector<KernelCurve>& curves);

// Inverse of write_curves_csv. Rows group into one curve per (mode, a) in
// order of first appearance; throws std::invalid_argument on a malformed
// header or row.
std::vector<KernelCurve> read_curves_csv(std::istream& is);

}  // namespace kernelde::kernel
