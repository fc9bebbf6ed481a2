#pragma once
// Differential-equation solving on a kernel basis: spline smoothing and
// differentiation of sampled curves, the trial-function model, collocation
// loss, exact and gradient-descent optimizers, the random benchmark family,
// and normalized residuals.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kernelde/expr.hpp"
#include "kernelde/kernel.hpp"

namespace kernelde::desolve {

// Cubic spline fit to samples. With lambda > 0 this is the smoothing spline
// minimizing sum (y_j - s(x_j))^2 + lambda * integral s''^2 (natural ends);
// lambda == 0 switches to the not-a-knot interpolant so polynomial data up to
// cubics is reproduced exactly. Evaluation outside the sample range extends
// the end segments.
struct SmoothingSpline {
    std::vector<double> knots;
    std::vector<double> values;         // fitted value at each knot
    std::vector<double> second_derivs;  // s'' at each knot
    double lambda = 0.0;

    double value(double x) const;
    double derivative(double x) const;
};

// Needs >= 4 samples with strictly increasing x.
SmoothingSpline fit_spline(const std::vector<double>& xs, const std::vector<double>& ys,
                           double lambda = 1e-3);

struct BasisFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
};

// The kernel slices kappa(., a_i) backing a trial function, either in closed
// form with analytic derivatives or spline-smoothed from estimated curves.
class BasisSet {
public:
    static BasisSet ideal(std::vector<double> centers = kernel::default_centers());
    static BasisSet from_curves(const std::vector<kernel::KernelCurve>& curves,
                                double lambda = 1e-3);
    static BasisSet from_functions(std::vector<double> centers, std::vector<BasisFunction> fns);

    size_t size() const { return fns_.size(); }
    double center(size_t i) const { return centers_.at(i); }
    double value(size_t i, double x) const { return fns_.at(i).value(x); }
    double derivative(size_t i, double x) const { return fns_.at(i).derivative(x); }

private:
    std::vector<double> centers_;
    std::vector<BasisFunction> fns_;
};

// f_tr(x) = offset + sum_i weights[i] * basis_i(x)
struct TrialModel {
    BasisSet basis;
    std::vector<double> weights;
    double offset = 0.0;

    double value(double x) const;
    double derivative(double x) const;
};

// D(x, f, df) = 0 on [0, 1] with boundary f(x0) = f0, judged on fixed
// collocation points inside (0, 1).
struct DEProblem {
    expr::Expr op;
    double x0 = 0.0;
    double f0 = 0.0;
    std::vector<double> collocation;
    std::uint64_t seed = 0;  // generator provenance, carried through files

    void validate() const;  // throws std::invalid_argument

    // JSON with fields operator, x0, f0, collocation_n, seed; collocation
    // points are rebuilt as the collocation_n midpoints of (0, 1).
    std::string to_json() const;
    static DEProblem from_json(const std::string& text);
};

// L = (1/|collocation|) sum_j D(x_j, f_tr, f_tr')^2 + 10 (f_tr(x0) - f0)^2
double loss(const TrialModel& model, const DEProblem& problem);

// Exact minimizer for operators affine in (f, df): the loss is then a convex
// quadratic in (weights, offset) and the normal equations solve it globally.
// A rank-deficient system falls back to the minimum-norm solution and sets
// the flag. Throws std::invalid_argument if the operator is not affine.
struct LinearSolveResult {
    TrialModel model;
    bool rank_deficient = false;
};
LinearSolveResult solve_linear(const DEProblem& problem, const BasisSet& basis);

// Plain gradient descent with central finite differences (step 1e-6) over
// (weights, offset); handles nonlinear operators. Returns the best iterate
// seen; throws std::runtime_error with a trace if the loss passes 1e6.
TrialModel solve_gradient(const DEProblem& problem, const BasisSet& basis,
                          std::vector<double> init, long steps = 10000, double rate = 0.05);

// The random benchmark family: target solutions h drawn from the span of the
// three kernel slices plus a constant, with weights and offset uniform in
// (-1, 1), wrapped into the linear DE f'/5 + f = h'/5 + h, f(0) = h(0), over
// 100 collocation midpoints.
struct BenchmarkCoeffs {
    std::array<double, 3> w{};
    double c = 0.0;
};
BenchmarkCoeffs benchmark_coeffs(std::uint64_t seed);
DEProblem benchmark_de_from(const BenchmarkCoeffs& coeffs, std::uint64_t seed = 0);
DEProblem generate_benchmark_de(std::uint64_t seed);
double benchmark_solution(std::uint64_t seed, double x);  // h for that seed

// RMSE between the trial function and the exact solution on a uniform grid,
// normalized by the exact solution's range there. A flat exact solution has
// no range; the result is then NaN.
double residual(const TrialModel& model, const std::function<double(double)>& exact,
                int grid_points = 201);

}  // namespace kernelde::desolve
