#include "kernelde/desolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"
#include "kernelde/rng.hpp"

namespace kernelde::desolve {

namespace {
constexpr double pi = 3.14159265358979323846;

int segment_of(const std::vector<double>& knots, double x)
{
    const auto it = std::upper_bound(knots.begin(), knots.end(), x);
    long seg = (it - knots.begin()) - 1;
    seg = std::clamp<long>(seg, 0, static_cast<long>(knots.size()) - 2);
    return static_cast<int>(seg);
}

void check_samples(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) throw std::invalid_argument("fit_spline: size mismatch");
    if (xs.size() < 4) throw std::invalid_argument("fit_spline: need at least 4 samples");
    for (size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1]))
            throw std::invalid_argument("fit_spline: sample x values must be strictly increasing");
}

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// kappa(x, a) as an expression in x, and its derivative
std::string kappa_expression(double a)
{
    const std::string p = fmt17(pi);
    const std::string as = fmt17(a);
    const std::string asq = fmt17(a * a);
    return "cos(" + p + "*(x-" + as + "))^2*cos(" + p + "*(x^2-" + asq + "))^2";
}

std::string kappa_derivative_expression(double a)
{
    const std::string p = fmt17(pi);
    const std::string as = fmt17(a);
    const std::string asq = fmt17(a * a);
    return "(-" + p + "*sin(2*" + p + "*(x-" + as + "))*cos(" + p + "*(x^2-" + asq + "))^2" +
           "-2*" + p + "*x*cos(" + p + "*(x-" + as + "))^2*sin(2*" + p + "*(x^2-" + asq + ")))";
}

double closed_form_derivative(double x, double a)
{
    const double c1 = std::cos(pi * (x - a));
    const double c2 = std::cos(pi * (x * x - a * a));
    return -pi * std::sin(2 * pi * (x - a)) * c2 * c2 -
           2 * pi * x * c1 * c1 * std::sin(2 * pi * (x * x - a * a));
}

std::vector<double> midpoints(int n)
{
    std::vector<double> xs(n);
    for (int j = 0; j < n; ++j) xs[j] = (j + 0.5) / n;
    return xs;
}
}  // namespace

double SmoothingSpline::value(double x) const
{
    const int i = segment_of(knots, x);
    const double h = knots[i + 1] - knots[i];
    const double u = knots[i + 1] - x, v = x - knots[i];
    return (u * u * u * second_derivs[i] + v * v * v * second_derivs[i + 1]) / (6 * h) +
           (values[i] / h - second_derivs[i] * h / 6) * u +
           (values[i + 1] / h - second_derivs[i + 1] * h / 6) * v;
}

double SmoothingSpline::derivative(double x) const
{
    const int i = segment_of(knots, x);
    const double h = knots[i + 1] - knots[i];
    const double u = knots[i + 1] - x, v = x - knots[i];
    return (-u * u * second_derivs[i] + v * v * second_derivs[i + 1]) / (2 * h) +
           (values[i + 1] - values[i]) / h -
           (second_derivs[i + 1] - second_derivs[i]) * h / 6;
}

SmoothingSpline fit_spline(const std::vector<double>& xs, const std::vector<double>& ys,
                           double lambda)
{
    check_samples(xs, ys);
    if (lambda < 0) throw std::invalid_argument("fit_spline: lambda must be nonnegative");
    const int n = static_cast<int>(xs.size());
    std::vector<double> h(n - 1);
    for (int i = 0; i + 1 < n; ++i) h[i] = xs[i + 1] - xs[i];

    SmoothingSpline s;
    s.knots = xs;
    s.lambda = lambda;

    if (lambda == 0.0) {
        // not-a-knot interpolation: the usual continuity rows plus third-
        // derivative continuity at the second and second-to-last knots
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        for (int i = 1; i + 1 < n; ++i) {
            m(i, i - 1) = h[i - 1] / 6;
            m(i, i) = (h[i - 1] + h[i]) / 3;
            m(i, i + 1) = h[i] / 6;
            rhs(i) = (ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1];
        }
        m(0, 0) = h[1];
        m(0, 1) = -(h[0] + h[1]);
        m(0, 2) = h[0];
        m(n - 1, n - 3) = h[n - 2];
        m(n - 1, n - 2) = -(h[n - 3] + h[n - 2]);
        m(n - 1, n - 1) = h[n - 3];
        Eigen::VectorXd sol = m.partialPivLu().solve(rhs);
        s.values = ys;
        s.second_derivs.assign(sol.data(), sol.data() + n);
        return s;
    }

    // penalized fit: with Q the second-difference map and R the Gram matrix
    // of the interior curvatures, the knot curvatures solve
    // (R + lambda Q^T Q) g = Q^T y and the fitted values are y - lambda Q g
    const int k = n - 2;
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, k);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
        q(j, j) = 1 / h[j];
        q(j + 1, j) = -1 / h[j] - 1 / h[j + 1];
        q(j + 2, j) = 1 / h[j + 1];
        r(j, j) = (h[j] + h[j + 1]) / 3;
        if (j + 1 < k) {
            r(j, j + 1) = h[j + 1] / 6;
            r(j + 1, j) = h[j + 1] / 6;
        }
    }
    Eigen::Map<const Eigen::VectorXd> y(ys.data(), n);
    Eigen::VectorXd g =
        (r + lambda * q.transpose() * q).ldlt().solve(q.transpose() * y);
    Eigen::VectorXd fitted = y - lambda * (q * g);
    s.values.assign(fitted.data(), fitted.data() + n);
    s.second_derivs.assign(n, 0.0);
    for (int j = 0; j < k; ++j) s.second_derivs[j + 1] = g(j);
    return s;
}

BasisSet BasisSet::ideal(std::vector<double> centers)
{
    BasisSet b;
    for (double a : centers) {
        b.fns_.push_back({[a](double x) { return kernel::closed_form(x, a); },
                          [a](double x) { return closed_form_derivative(x, a); }});
    }
    b.centers_ = std::move(centers);
    return b;
}

BasisSet BasisSet::from_curves(const std::vector<kernel::KernelCurve>& curves, double lambda)
{
    BasisSet b;
    for (const kernel::KernelCurve& c : curves) {
        SmoothingSpline s = fit_spline(c.grid, c.values, lambda);
        b.centers_.push_back(c.a);
        b.fns_.push_back({[s](double x) { return s.value(x); },
                          [s](double x) { return s.derivative(x); }});
    }
    return b;
}

BasisSet BasisSet::from_functions(std::vector<double> centers, std::vector<BasisFunction> fns)
{
    if (centers.size() != fns.size())
        throw std::invalid_argument("BasisSet: centers and functions must align");
    BasisSet b;
    b.centers_ = std::move(centers);
    b.fns_ = std::move(fns);
    return b;
}

double TrialModel::value(double x) const
{
    double v = offset;
    for (size_t i = 0; i < weights.size(); ++i) v += weights[i] * basis.value(i, x);
    return v;
}

double TrialModel::derivative(double x) const
{
    double v = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) v += weights[i] * basis.derivative(i, x);
    return v;
}

void DEProblem::validate() const
{
    if (x0 < 0.0 || x0 > 1.0) throw std::invalid_argument("DEProblem: x0 outside [0, 1]");
    if (collocation.empty()) throw std::invalid_argument("DEProblem: no collocation points");
    for (double x : collocation)
        if (x <= 0.0 || x >= 1.0)
            throw std::invalid_argument("DEProblem: collocation points must lie inside (0, 1)");
}

std::string DEProblem::to_json() const
{
    nlohmann::ordered_json j;
    j["operator"] = op.source();
    j["x0"] = x0;
    j["f0"] = f0;
    j["collocation_n"] = collocation.size();
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

DEProblem DEProblem::from_json(const std::string& text)
{
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("operator")) throw std::invalid_argument("DEProblem: missing operator");
    DEProblem p;
    p.op = expr::Expr::parse(j.at("operator").get<std::string>());
    p.x0 = j.value("x0", 0.0);
    p.f0 = j.value("f0", 0.0);
    p.collocation = midpoints(j.value("collocation_n", 100));
    p.seed = j.value("seed", std::uint64_t{0});
    p.validate();
    return p;
}

double loss(const TrialModel& model, const DEProblem& problem)
{
    double acc = 0.0;
    for (double x : problem.collocation) {
        const double d = problem.op.eval(x, model.value(x), model.derivative(x));
        acc += d * d;
    }
    acc /= static_cast<double>(problem.collocation.size());
    const double bv = model.value(problem.x0) - problem.f0;
    return acc + 10.0 * bv * bv;
}

LinearSolveResult solve_linear(const DEProblem& problem, const BasisSet& basis)
{
    problem.validate();
    const int nb = static_cast<int>(basis.size());
    const int dim = nb + 1;
    const int nc = static_cast<int>(problem.collocation.size());

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nc + 1, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nc + 1);
    const double row_scale = 1.0 / std::sqrt(static_cast<double>(nc));
    for (int j = 0; j < nc; ++j) {
        const double x = problem.collocation[j];
        const double r = problem.op.eval(x, 0.0, 0.0);
        const double q = problem.op.eval(x, 1.0, 0.0) - r;
        const double p = problem.op.eval(x, 0.0, 1.0) - r;
        for (const auto& [pf, pdf] : {std::pair{1.3, -0.7}, std::pair{-2.1, 0.4}}) {
            const double probe = problem.op.eval(x, pf, pdf);
            if (std::abs(probe - (p * pdf + q * pf + r)) > 1e-9 * (1.0 + std::abs(probe)))
                throw std::invalid_argument("solve_linear: operator is not affine in (f, df)");
        }
        for (int i = 0; i < nb; ++i)
            a(j, i) = row_scale * (p * basis.derivative(i, x) + q * basis.value(i, x));
        a(j, nb) = row_scale * q;
        b(j) = -row_scale * r;
    }
    const double bnd = std::sqrt(10.0);
    for (int i = 0; i < nb; ++i) a(nc, i) = bnd * basis.value(i, problem.x0);
    a(nc, nb) = bnd;
    b(nc) = bnd * problem.f0;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    Eigen::VectorXd theta = svd.solve(b);

    LinearSolveResult res;
    res.rank_deficient = svd.rank() < dim;
    res.model.basis = basis;
    res.model.weights.assign(theta.data(), theta.data() + nb);
    res.model.offset = theta(nb);
    return res;
}

TrialModel solve_gradient(const DEProblem& problem, const BasisSet& basis,
                          std::vector<double> init, long steps, double rate)
{
    problem.validate();
    const size_t dim = basis.size() + 1;
    if (init.size() != dim)
        throw std::invalid_argument("solve_gradient: init needs one weight per basis plus offset");

    TrialModel m;
    m.basis = basis;
    m.weights.assign(basis.size(), 0.0);
    auto loss_at = [&](const std::vector<double>& th) {
        for (size_t i = 0; i < basis.size(); ++i) m.weights[i] = th[i];
        m.offset = th[basis.size()];
        return loss(m, problem);
    };

    std::vector<double> th = std::move(init);
    std::vector<double> best_th = th;
    double best_loss = loss_at(th);
    const double fd = 1e-6;
    for (long step = 0; step < steps; ++step) {
        const double cur = loss_at(th);
        if (cur > 1e6) {
            std::ostringstream msg;
            msg << "solve_gradient: diverged at step " << step << " with loss " << cur
                << " (rate " << rate << ")";
            throw std::runtime_error(msg.str());
        }
        if (cur < best_loss) {
            best_loss = cur;
            best_th = th;
        }
        std::vector<double> grad(dim);
        for (size_t i = 0; i < dim; ++i) {
            const double keep = th[i];
            th[i] = keep + fd;
            const double up = loss_at(th);
            th[i] = keep - fd;
            const double down = loss_at(th);
            th[i] = keep;
            grad[i] = (up - down) / (2 * fd);
        }
        for (size_t i = 0; i < dim; ++i) th[i] -= rate * grad[i];
    }
    if (const double fin = loss_at(th); fin < best_loss) {
        best_loss = fin;
        best_th = th;
    }
    loss_at(best_th);  // leave m at the best parameters
    return m;
}

BenchmarkCoeffs benchmark_coeffs(std::uint64_t seed)
{
    rng::Stream rs = rng::shot_stream(seed, 0, 0);
    BenchmarkCoeffs c;
    for (double& w : c.w) w = 2 * rs.uniform() - 1;
    c.c = 2 * rs.uniform() - 1;
    return c;
}

DEProblem benchmark_de_from(const BenchmarkCoeffs& coeffs, std::uint64_t seed)
{
    std::string h, hp;
    for (int n = 1; n <= 3; ++n) {
        const double a = n / 4.0;
        const std::string w = "(" + fmt17(coeffs.w[n - 1]) + ")";
        if (n > 1) {
            h += "+";
            hp += "+";
        }
        h += w + "*" + kappa_expression(a);
        hp += w + "*" + kappa_derivative_expression(a);
    }
    h += "+(" + fmt17(coeffs.c) + ")";

    DEProblem p;
    p.op = expr::Expr::parse("0.2*df+f-(0.2*(" + hp + ")+(" + h + "))");
    p.x0 = 0.0;
    p.f0 = coeffs.c;
    for (int n = 1; n <= 3; ++n) p.f0 += coeffs.w[n - 1] * kernel::closed_form(0.0, n / 4.0);
    p.collocation = midpoints(100);
    p.seed = seed;
    return p;
}

DEProblem generate_benchmark_de(std::uint64_t seed)
{
    return benchmark_de_from(benchmark_coeffs(seed), seed);
}

double benchmark_solution(std::uint64_t seed, double x)
{
    const BenchmarkCoeffs c = benchmark_coeffs(seed);
    double v = c.c;
    for (int n = 1; n <= 3; ++n) v += c.w[n - 1] * kernel::closed_form(x, n / 4.0);
    return v;
}

double residual(const TrialModel& model, const std::function<double(double)>& exact,
                int grid_points)
{
    if (grid_points < 2) throw std::invalid_argument("residual: need at least 2 grid points");
    double sq = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        const double x = static_cast<double>(i) / (grid_points - 1);
        const double e = exact(x);
        const double d = model.value(x) - e;
        sq += d * d;
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (hi - lo <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(sq / grid_points) / (hi - lo);
}

}  // namespace kernelde::desolve
