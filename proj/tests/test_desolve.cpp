#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kernelde/desolve.hpp"
#include "kernelde/kernel.hpp"
#include "kernelde/rng.hpp"

using namespace kernelde;
using desolve::BasisSet;
using desolve::BenchmarkCoeffs;
using desolve::DEProblem;
using desolve::TrialModel;

namespace {
constexpr double pi = 3.14159265358979323846;

double kappa_prime(double x, double a)
{
    const double c1 = std::cos(pi * (x - a));
    const double c2 = std::cos(pi * (x * x - a * a));
    return -pi * std::sin(2 * pi * (x - a)) * c2 * c2 -
           2 * pi * x * c1 * c1 * std::sin(2 * pi * (x * x - a * a));
}

TrialModel model_with(const BasisSet& basis, std::vector<double> w, double c)
{
    TrialModel m;
    m.basis = basis;
    m.weights = std::move(w);
    m.offset = c;
    return m;
}

std::function<double(double)> solution_of(std::uint64_t seed)
{
    return [seed](double x) { return desolve::benchmark_solution(seed, x); };
}
}  // namespace

TEST_CASE("spline with lambda 0 reproduces a cubic and its derivative")
{
    auto p = [](double x) { return 2 * x * x * x - x * x + 0.5 * x - 0.3; };
    auto dp = [](double x) { return 6 * x * x - 2 * x + 0.5; };
    std::vector<double> xs, ys;
    for (int i = 0; i < 10; ++i) {
        xs.push_back(i / 9.0);
        ys.push_back(p(xs.back()));
    }
    auto s = desolve::fit_spline(xs, ys, 0.0);
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        CHECK(std::abs(s.value(x) - p(x)) < 1e-8);
        CHECK(std::abs(s.derivative(x) - dp(x)) < 1e-6);
    }
}

TEST_CASE("smoothed kernel samples give usable derivatives")
{
    // self-check the analytic derivative against central differences first
    for (double x : {0.1, 0.37, 0.52, 0.8}) {
        const double fd =
            (kernel::closed_form(x + 1e-6, 0.5) - kernel::closed_form(x - 1e-6, 0.5)) / 2e-6;
        CHECK(std::abs(kappa_prime(x, 0.5) - fd) < 1e-6);
    }

    std::vector<double> xs, ys;
    for (int i = 0; i <= 40; ++i) {
        xs.push_back(i / 40.0);
        ys.push_back(kernel::closed_form(xs.back(), 0.5));
    }

    // the analytic derivative always differentiates the spline itself
    for (double lambda : {0.0, 1e-6, 1e-3}) {
        auto s = desolve::fit_spline(xs, ys, lambda);
        double worst = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double x = 0.02 + 0.96 * i / 200.0;
            const double fd = (s.value(x + 1e-6) - s.value(x - 1e-6)) / 2e-6;
            worst = std::max(worst, std::abs(s.derivative(x) - fd));
        }
        CHECK(worst < 1e-6);
    }

    // fidelity to the true kernel slope depends on the penalty weight. These
    // bands pin the same behavior as scipy's make_smoothing_spline 1.15.3 on
    // identical input (1.036 / 0.0093 / 0.00105 max error).
    auto deriv_err = [&](double lambda) {
        auto s = desolve::fit_spline(xs, ys, lambda);
        double worst = 0.0;
        for (int i = 0; i <= 500; ++i) {
            const double x = 0.05 + 0.9 * i / 500.0;
            worst = std::max(worst, std::abs(s.derivative(x) - kappa_prime(x, 0.5)));
        }
        return worst;
    };
    CHECK(deriv_err(1e-3) == doctest::Approx(1.036).epsilon(0.01));
    CHECK(deriv_err(1e-6) < 1e-2);
    CHECK(deriv_err(0.0) < 2e-3);
}

TEST_CASE("spline of constant data has zero derivative")
{
    std::vector<double> xs = {0.0, 0.3, 0.55, 0.8, 1.0};
    std::vector<double> ys(xs.size(), 0.7);
    for (double lambda : {0.0, 1e-3, 1.0}) {
        auto s = desolve::fit_spline(xs, ys, lambda);
        for (int i = 0; i <= 20; ++i) {
            CHECK(std::abs(s.derivative(i / 20.0)) < 1e-9);
            CHECK(s.value(i / 20.0) == doctest::Approx(0.7).epsilon(1e-9));
        }
    }
}

TEST_CASE("spline input validation")
{
    CHECK_THROWS_AS(desolve::fit_spline({0, 0.5, 1}, {1, 2, 3}, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(desolve::fit_spline({0, 0.5, 0.5, 1}, {1, 2, 3, 4}, 1e-3),
                    std::invalid_argument);
    CHECK_THROWS_AS(desolve::fit_spline({0, 0.5, 0.4, 1}, {1, 2, 3, 4}, 1e-3),
                    std::invalid_argument);
    CHECK_THROWS_AS(desolve::fit_spline({0, 0.3, 0.6, 1}, {1, 2, 3, 4}, -1.0),
                    std::invalid_argument);
}

TEST_CASE("generated benchmark: reproducibility and internal consistency")
{
    auto p1 = desolve::generate_benchmark_de(42);
    auto p2 = desolve::generate_benchmark_de(42);
    CHECK(p1.op.source() == p2.op.source());
    CHECK(p1.f0 == p2.f0);
    CHECK(p1.collocation == p2.collocation);
    CHECK(desolve::generate_benchmark_de(43).op.source() != p1.op.source());

    REQUIRE(p1.collocation.size() == 100);
    for (double x : p1.collocation) {
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
    CHECK(p1.x0 == 0.0);
    CHECK(p1.f0 == doctest::Approx(desolve::benchmark_solution(42, 0.0)).epsilon(1e-12));

    // operator encodes g = h/5' + h: plugging h and a finite-difference h'
    // into D must give ~0 everywhere
    auto h = solution_of(42);
    for (double x : p1.collocation) {
        const double hp = (h(x + 1e-6) - h(x - 1e-6)) / 2e-6;
        CHECK(std::abs(p1.op.eval(x, h(x), hp)) < 1e-9);
    }
}

TEST_CASE("loss oracles")
{
    // exact solution in the closed-form basis: loss vanishes
    auto prob = desolve::generate_benchmark_de(5);
    auto coeffs = desolve::benchmark_coeffs(5);
    auto exact = model_with(BasisSet::ideal(), {coeffs.w[0], coeffs.w[1], coeffs.w[2]}, coeffs.c);
    CHECK(desolve::loss(exact, prob) < 1e-12);

    // derivative-only operator: an offset hits the boundary term alone
    DEProblem pure;
    pure.op = expr::Expr::parse("df");
    pure.x0 = 0.0;
    pure.f0 = 0.3;
    pure.collocation = {0.25, 0.5, 0.75};
    auto flat = model_with(BasisSet::ideal(), {0, 0, 0}, 0.4);
    CHECK(desolve::loss(flat, pure) == doctest::Approx(10 * 0.01).epsilon(1e-12));

    // zero model on the benchmark with f0 = 2: boundary 40 plus the mean
    // squared right-hand side
    auto prob2 = desolve::generate_benchmark_de(9);
    prob2.f0 = 2.0;
    double coll = 0.0;
    for (double x : prob2.collocation) {
        const double g = -prob2.op.eval(x, 0.0, 0.0);
        coll += g * g;
    }
    coll /= static_cast<double>(prob2.collocation.size());
    auto zero = model_with(BasisSet::ideal(), {0, 0, 0}, 0.0);
    CHECK(desolve::loss(zero, prob2) == doctest::Approx(40.0 + coll).epsilon(1e-12));
}

TEST_CASE("solve_linear recovers the generating parameters")
{
    BenchmarkCoeffs coeffs;
    coeffs.w = {0.3, -0.5, 0.7};
    coeffs.c = 0.1;
    auto prob = desolve::benchmark_de_from(coeffs);
    auto res = desolve::solve_linear(prob, BasisSet::ideal());
    CHECK(!res.rank_deficient);
    for (int i = 0; i < 3; ++i)
        CHECK(res.model.weights[i] == doctest::Approx(coeffs.w[i]).epsilon(1e-6));
    CHECK(res.model.offset == doctest::Approx(coeffs.c).epsilon(1e-6));
    CHECK(desolve::loss(res.model, prob) < 1e-12);
}

TEST_CASE("affine basis distortions are absorbed")
{
    auto prob = desolve::generate_benchmark_de(77);
    auto exact = solution_of(77);

    const double sdist = 0.8, tdist = 0.05;
    std::vector<desolve::BasisFunction> fns;
    std::vector<double> centers = kernel::default_centers();
    for (double a : centers)
        fns.push_back({[a, sdist, tdist](double x) {
                           return sdist * kernel::closed_form(x, a) + tdist;
                       },
                       [a, sdist](double x) { return sdist * kappa_prime(x, a); }});
    auto distorted = BasisSet::from_functions(centers, std::move(fns));

    auto res = desolve::solve_linear(prob, distorted);
    auto coeffs = desolve::benchmark_coeffs(77);
    for (int i = 0; i < 3; ++i)
        CHECK(res.model.weights[i] == doctest::Approx(coeffs.w[i] / sdist).epsilon(1e-6));
    CHECK(desolve::residual(res.model, exact) < 1e-6);

    // the general invariant: any s != 0, t leaves the achieved residual alone
    auto res_clean = desolve::solve_linear(prob, BasisSet::ideal());
    CHECK(std::abs(desolve::loss(res.model, prob) - desolve::loss(res_clean.model, prob)) < 1e-9);
}

TEST_CASE("zero right-hand side gives the zero model")
{
    DEProblem prob;
    prob.op = expr::Expr::parse("0.2*df + f");
    prob.x0 = 0.0;
    prob.f0 = 0.0;
    prob.collocation = desolve::generate_benchmark_de(1).collocation;
    auto res = desolve::solve_linear(prob, BasisSet::ideal());
    CHECK(!res.rank_deficient);
    for (double w : res.model.weights) CHECK(std::abs(w) < 1e-9);
    CHECK(std::abs(res.model.offset) < 1e-9);
}

TEST_CASE("rank deficiency falls back to the minimum-norm solution")
{
    BenchmarkCoeffs coeffs;
    coeffs.w = {0.5, 0.0, -0.3};
    coeffs.c = 0.2;
    auto prob = desolve::benchmark_de_from(coeffs);

    auto dup = [](double a) {
        return desolve::BasisFunction{[a](double x) { return kernel::closed_form(x, a); },
                                      [a](double x) { return kappa_prime(x, a); }};
    };
    auto degenerate =
        BasisSet::from_functions({0.25, 0.25, 0.75}, {dup(0.25), dup(0.25), dup(0.75)});
    auto res = desolve::solve_linear(prob, degenerate);
    CHECK(res.rank_deficient);
    CHECK(res.model.weights[0] == doctest::Approx(res.model.weights[1]).epsilon(1e-9));
    CHECK(res.model.weights[0] + res.model.weights[1] == doctest::Approx(0.5).epsilon(1e-6));
    auto exact = [&coeffs](double x) {
        return coeffs.c + 0.5 * kernel::closed_form(x, 0.25) - 0.3 * kernel::closed_form(x, 0.75);
    };
    CHECK(desolve::residual(res.model, exact) < 1e-6);
}

TEST_CASE("solve_linear rejects nonlinear operators")
{
    DEProblem prob;
    prob.op = expr::Expr::parse("df + f^2");
    prob.collocation = {0.5};
    CHECK_THROWS_AS(desolve::solve_linear(prob, BasisSet::ideal()), std::invalid_argument);
}

TEST_CASE("gradient descent agrees with the exact solver on linear problems")
{
    auto prob = desolve::generate_benchmark_de(21);
    auto basis = BasisSet::ideal();
    auto exact = desolve::solve_linear(prob, basis);
    auto gd = desolve::solve_gradient(prob, basis, {0, 0, 0, 0}, 10000, 0.05);
    CHECK(std::abs(desolve::loss(gd, prob) - desolve::loss(exact.model, prob)) < 1e-4);

    // starting at the minimizer never makes things worse
    std::vector<double> init = exact.model.weights;
    init.push_back(exact.model.offset);
    auto stay = desolve::solve_gradient(prob, basis, init, 100, 0.05);
    CHECK(desolve::loss(stay, prob) <= desolve::loss(exact.model, prob) + 1e-12);
}

TEST_CASE("gradient descent aborts on divergence")
{
    auto prob = desolve::generate_benchmark_de(3);
    CHECK_THROWS_AS(desolve::solve_gradient(prob, BasisSet::ideal(), {0, 0, 0, 0}, 1000, 10.0),
                    std::runtime_error);
}

TEST_CASE("gradient descent handles a nonlinear operator")
{
    // D = df + 5 (f - h)^3 - h' has exact solution f = h
    const std::uint64_t seed = 12;
    auto coeffs = desolve::benchmark_coeffs(seed);
    std::string h, hp;
    char buf[512];
    for (int n = 1; n <= 3; ++n) {
        const double a = n / 4.0;
        std::snprintf(buf, sizeof(buf), "(%.17g)*cos(%.17g*(x-%.17g))^2*cos(%.17g*(x^2-%.17g))^2",
                      coeffs.w[n - 1], pi, a, pi, a * a);
        h += (n > 1 ? "+" : "") + std::string(buf);
        std::snprintf(buf, sizeof(buf),
                      "(%.17g)*(-%.17g*sin(2*%.17g*(x-%.17g))*cos(%.17g*(x^2-%.17g))^2"
                      "-2*%.17g*x*cos(%.17g*(x-%.17g))^2*sin(2*%.17g*(x^2-%.17g)))",
                      coeffs.w[n - 1], pi, pi, a, pi, a * a, pi, pi, a, pi, a * a);
        hp += (n > 1 ? "+" : "") + std::string(buf);
    }
    std::snprintf(buf, sizeof(buf), "+(%.17g)", coeffs.c);
    h += buf;

    DEProblem prob;
    prob.op = expr::Expr::parse("df + 5*(f - (" + h + "))^3 - (" + hp + ")");
    prob.x0 = 0.0;
    prob.f0 = desolve::benchmark_solution(seed, 0.0);
    prob.collocation = desolve::generate_benchmark_de(seed).collocation;

    // start off the solution but inside the stable basin of the cubic term
    auto model = desolve::solve_gradient(
        prob, BasisSet::ideal(),
        {coeffs.w[0] + 0.2, coeffs.w[1], coeffs.w[2], coeffs.c - 0.1}, 5000, 0.02);
    CHECK(desolve::residual(model, solution_of(seed)) < 0.05);
    CHECK(desolve::loss(model, prob) <
          desolve::loss(model_with(BasisSet::ideal(),
                                   {coeffs.w[0] + 0.2, coeffs.w[1], coeffs.w[2]},
                                   coeffs.c - 0.1),
                        prob));
}

TEST_CASE("benchmark solved in its own basis has negligible residual")
{
    for (std::uint64_t seed : {2u, 14u, 56u}) {
        auto prob = desolve::generate_benchmark_de(seed);
        auto res = desolve::solve_linear(prob, BasisSet::ideal());
        CHECK(desolve::residual(res.model, solution_of(seed)) < 1e-6);
    }
}

TEST_CASE("residual oracles")
{
    const std::uint64_t seed = 33;
    auto coeffs = desolve::benchmark_coeffs(seed);
    auto basis = BasisSet::ideal();
    auto exact_model =
        model_with(basis, {coeffs.w[0], coeffs.w[1], coeffs.w[2]}, coeffs.c);
    auto exact = solution_of(seed);
    CHECK(desolve::residual(exact_model, exact) < 1e-12);

    // constant offset of 0.1 * range scores exactly 0.1
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 201; ++i) {
        const double v = exact(i / 200.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto offset_model =
        model_with(basis, {coeffs.w[0], coeffs.w[1], coeffs.w[2]}, coeffs.c + 0.1 * (hi - lo));
    CHECK(desolve::residual(offset_model, exact) == doctest::Approx(0.1).epsilon(1e-12));

    // flat exact solution: no range to normalize by
    auto flat_exact = [](double) { return 1.5; };
    CHECK(std::isnan(desolve::residual(exact_model, flat_exact)));

    // discretization stability
    auto rough = model_with(basis, {coeffs.w[0] + 0.1, coeffs.w[1], coeffs.w[2]}, coeffs.c);
    const double r201 = desolve::residual(rough, exact, 201);
    const double r401 = desolve::residual(rough, exact, 401);
    CHECK(std::abs(r201 - r401) < 1e-3);
}

TEST_CASE("loss is convex along segments for linear operators")
{
    auto prob = desolve::generate_benchmark_de(64);
    auto basis = BasisSet::ideal();
    auto rs = rng::shot_stream(555, 0, 0);
    auto rand_params = [&rs]() {
        std::vector<double> th(4);
        for (double& v : th) v = 4 * rs.uniform() - 2;
        return th;
    };
    for (int trial = 0; trial < 100; ++trial) {
        auto ta = rand_params();
        auto tb = rand_params();
        auto at = [&](const std::vector<double>& th) {
            return desolve::loss(model_with(basis, {th[0], th[1], th[2]}, th[3]), prob);
        };
        std::vector<double> mid(4);
        for (int i = 0; i < 4; ++i) mid[i] = 0.5 * (ta[i] + tb[i]);
        CHECK(at(mid) <= std::max(at(ta), at(tb)) + 1e-12);
    }
}

TEST_CASE("loss gradient matches the quadratic form of the linear system")
{
    auto prob = desolve::generate_benchmark_de(31);
    auto basis = BasisSet::ideal();
    const int nc = static_cast<int>(prob.collocation.size());

    // rebuild the design matrix from the public surface
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nc + 1, 4);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nc + 1);
    for (int j = 0; j < nc; ++j) {
        const double x = prob.collocation[j];
        const double r = prob.op.eval(x, 0, 0);
        const double q = prob.op.eval(x, 1, 0) - r;
        const double p = prob.op.eval(x, 0, 1) - r;
        for (int i = 0; i < 3; ++i)
            a(j, i) = (p * kappa_prime(x, basis.center(i)) +
                       q * kernel::closed_form(x, basis.center(i))) /
                      std::sqrt(nc);
        a(j, 3) = q / std::sqrt(nc);
        b(j) = -r / std::sqrt(nc);
    }
    for (int i = 0; i < 3; ++i)
        a(nc, i) = std::sqrt(10.0) * kernel::closed_form(prob.x0, basis.center(i));
    a(nc, 3) = std::sqrt(10.0);
    b(nc) = std::sqrt(10.0) * prob.f0;

    auto rs = rng::shot_stream(777, 0, 0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd th(4);
        for (int i = 0; i < 4; ++i) th(i) = 2 * rs.uniform() - 1;
        const Eigen::VectorXd analytic = 2 * a.transpose() * (a * th - b);

        Eigen::VectorXd fd(4);
        const double hstep = 1e-5;
        for (int i = 0; i < 4; ++i) {
            auto at = [&](double delta) {
                Eigen::VectorXd t2 = th;
                t2(i) += delta;
                return desolve::loss(model_with(basis, {t2(0), t2(1), t2(2)}, t2(3)), prob);
            };
            fd(i) = (at(hstep) - at(-hstep)) / (2 * hstep);
        }
        CHECK((fd - analytic).norm() <= 1e-6 * std::max(1.0, analytic.norm()));
    }
}

TEST_CASE("problem JSON round trip")
{
    auto prob = desolve::generate_benchmark_de(19);
    const std::string text = prob.to_json();
    auto back = DEProblem::from_json(text);
    CHECK(back.op.source() == prob.op.source());
    CHECK(back.x0 == prob.x0);
    CHECK(back.f0 == prob.f0);
    CHECK(back.collocation == prob.collocation);
    CHECK(back.seed == 19);

    CHECK_THROWS_AS(DEProblem::from_json("{\"x0\": 0}"), std::invalid_argument);
    CHECK_THROWS(DEProblem::from_json("not json"));

    auto small = DEProblem::from_json(
        "{\"operator\": \"df\", \"x0\": 0, \"f0\": 1, \"collocation_n\": 50}");
    CHECK(small.collocation.size() == 50);
    CHECK(small.collocation.front() == doctest::Approx(0.01));
}
