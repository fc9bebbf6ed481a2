#include "kernelde/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <iterator>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kernelde/circuits.hpp"
#include "kernelde/code422.hpp"
#include "kernelde/qsim.hpp"
#include "kernelde/rng.hpp"

namespace kernelde::kernel {

namespace {
constexpr double pi = 3.14159265358979323846;

bool has_channels(const circuits::Circuit& c)
{
    for (const auto& in : c.instrs)
        if (in.kind == circuits::Instruction::Kind::channel) return true;
    return false;
}

// Exact readout distribution of a channel-free circuit, as a cumulative table
// for categorical sampling. One uniform per shot reproduces the trajectory
// statistics at a fraction of the cost.
struct RecordSampler {
    Eigen::VectorXd cum;
    int n_measured = 0;

    explicit RecordSampler(const circuits::Circuit& c)
    {
        qsim::QuditState s = qsim::QuditState::pure_zero(c.n_sites);
        qsim::run_circuit(s, c);
        const std::vector<int> sites = c.measured_sites();
        n_measured = static_cast<int>(sites.size());
        Eigen::VectorXd dist = qsim::readout_distribution(s, sites);
        cum.resize(dist.size());
        double acc = 0.0;
        for (long i = 0; i < dist.size(); ++i) {
            acc += dist(i);
            cum(i) = acc;
        }
        cum(dist.size() - 1) = 1.0;
    }

    std::uint32_t draw(rng::Stream& rs) const
    {
        const double u = rs.uniform();
        const double* begin = cum.data();
        const double* it = std::upper_bound(begin, begin + cum.size(), u);
        return static_cast<std::uint32_t>(it - begin);
    }
};

// Draws either a full Monte Carlo trajectory or, when the decorated circuit
// carries no channels, a categorical sample from the exact distribution.
class ShotSource {
public:
    ShotSource(const circuits::Circuit& c, std::uint64_t seed) : circuit_(c), seed_(seed)
    {
        if (!has_channels(c)) sampler_ = std::make_unique<RecordSampler>(c);
    }

    qsim::Shot next(long index) const
    {
        rng::Stream rs = rng::shot_stream(seed_, 0, static_cast<std::uint64_t>(index));
        if (sampler_) {
            qsim::Shot s;
            s.bits = sampler_->draw(rs);
            s.n_measured = sampler_->n_measured;
            return s;
        }
        return qsim::run_trajectory(circuit_, rs);
    }

private:
    const circuits::Circuit& circuit_;
    std::uint64_t seed_;
    std::unique_ptr<RecordSampler> sampler_;
};

void format_value(std::ostream& os, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    os << buf;
}
}  // namespace

std::string mode_name(Mode m)
{
    switch (m) {
        case Mode::ideal: return "ideal";
        case Mode::physical: return "physical";
        default: return "logical";
    }
}

Mode mode_from_name(const std::string& name)
{
    if (name == "ideal") return Mode::ideal;
    if (name == "physical") return Mode::physical;
    if (name == "logical") return Mode::logical;
    throw std::invalid_argument("unknown kernel mode: " + name);
}

double closed_form(double x, double a)
{
    const double c1 = std::cos(pi * (x - a));
    const double c2 = std::cos(pi * (x * x - a * a));
    return c1 * c1 * c2 * c2;
}

Estimate estimate_kernel(Mode mode, double x, double a, long shots,
                         const noise::NoiseModel& m, std::uint64_t seed)
{
    if (shots <= 0) throw std::invalid_argument("estimate_kernel: shots must be positive");

    Estimate est;
    if (mode == Mode::ideal) {
        est.kappa = closed_form(x, a);
        est.stats.shots_requested = shots;
        est.stats.shots_accepted = shots;
        return est;
    }

    if (mode == Mode::physical) {
        const circuits::Circuit c =
            noise::apply_noise_model(circuits::build_physical_kernel(x, a), m);
        const ShotSource source(c, seed);
        long good = 0;
        for (long k = 0; k < shots; ++k)
            if (source.next(k).bits == 0) ++good;
        est.kappa = static_cast<double>(good) / static_cast<double>(shots);
        est.stats.shots_requested = shots;
        est.stats.shots_accepted = shots;
        return est;
    }

    const circuits::Circuit c = noise::apply_noise_model(circuits::build_logical_kernel(x, a), m);
    const ShotSource source(c, seed);
    long drawn = 0, accepted = 0, good = 0, flag_rej = 0, parity_rej = 0, loss_rej = 0;
    while (accepted < shots) {
        if (drawn >= 100 * shots) {
            std::ostringstream msg;
            msg << "estimate_kernel: acceptance rate "
                << static_cast<double>(accepted) / static_cast<double>(drawn) << " at (x=" << x
                << ", a=" << a << ") still below 1% after 100x oversampling";
            throw std::runtime_error(msg.str());
        }
        const code422::DecodeResult d = code422::decode(source.next(drawn));
        ++drawn;
        if (!d.accepted) {
            switch (d.reject_reason) {
                case code422::Reject::flag: ++flag_rej; break;
                case code422::Reject::parity: ++parity_rej; break;
                default: ++loss_rej; break;
            }
            continue;
        }
        ++accepted;
        if (d.b1 == 0 && d.b2 == 0) ++good;
    }
    est.kappa = static_cast<double>(good) / static_cast<double>(accepted);
    est.stats.shots_requested = drawn;
    est.stats.shots_accepted = accepted;
    const double n = static_cast<double>(drawn);
    est.stats.flag_reject_rate = static_cast<double>(flag_rej) / n;
    est.stats.parity_reject_rate = static_cast<double>(parity_rej) / n;
    est.stats.total_discard_rate = static_cast<double>(flag_rej + parity_rej + loss_rej) / n;
    return est;
}

std::vector<double> default_grid()
{
    std::vector<double> g(41);
    for (int i = 0; i < 41; ++i) g[i] = static_cast<double>(i) / 40.0;
    return g;
}

std::vector<double> default_centers() { return {0.25, 0.5, 0.75}; }

std::vector<KernelCurve> sweep_curves(Mode mode, const std::vector<double>& centers,
                                      const std::vector<double>& grid, long shots,
                                      const noise::NoiseModel& m, std::uint64_t seed)
{
    if (centers.empty() || grid.empty())
        throw std::invalid_argument("sweep_curves: centers and grid must be nonempty");
    for (double x : grid)
        if (x < 0.0 || x > 1.0)
            throw std::invalid_argument("sweep_curves: grid points must lie in [0, 1]");

    std::vector<KernelCurve> curves;
    curves.reserve(centers.size());
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        KernelCurve curve;
        curve.mode = mode;
        curve.a = centers[ci];
        curve.grid = grid;
        for (size_t pi = 0; pi < grid.size(); ++pi) {
            const std::uint64_t point_seed =
                rng::shot_stream(seed, ci * grid.size() + pi, 0).next_u64();
            const Estimate est = estimate_kernel(mode, grid[pi], centers[ci], shots, m, point_seed);
            curve.values.push_back(est.kappa);
            curve.shots_requested.push_back(est.stats.shots_requested);
            curve.shots_accepted.push_back(est.stats.shots_accepted);
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

DistortionReport distortion(const KernelCurve& curve)
{
    const size_t n = curve.values.size();
    if (n < 3 || curve.grid.size() != n)
        throw std::invalid_argument("distortion: curve needs at least 3 aligned points");

    double mean_v = 0.0, mean_y = 0.0;
    std::vector<double> ideal(n);
    for (size_t i = 0; i < n; ++i) {
        ideal[i] = closed_form(curve.grid[i], curve.a);
        mean_v += curve.values[i];
        mean_y += ideal[i];
    }
    mean_v /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double var_v = 0.0, cov = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dv = curve.values[i] - mean_v;
        var_v += dv * dv;
        cov += dv * (ideal[i] - mean_y);
    }

    DistortionReport rep;
    if (var_v < 1e-18) {
        rep.scale = 1.0;
        rep.shift = mean_y - mean_v;
        rep.scale_identifiable = false;
    } else {
        rep.scale = cov / var_v;
        rep.shift = mean_y - rep.scale * mean_v;
    }

    double sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = rep.scale * curve.values[i] + rep.shift - ideal[i];
        sq += r * r;
    }
    rep.rmse_after_rescale = std::sqrt(sq / static_cast<double>(n));
    return rep;
}

void write_curves_csv(std::ostream& os, const std::vector<KernelCurve>& curves)
{
    os << "mode,a,x,kappa,shots_requested,shots_accepted\n";
    for (const KernelCurve& c : curves)
        for (size_t i = 0; i < c.values.size(); ++i) {
            os << mode_name(c.mode) << ',';
            format_value(os, c.a);
            os << ',';
            format_value(os, c.grid[i]);
            os << ',';
            format_value(os, c.values[i]);
            os << ',' << c.shots_requested[i] << ',' << c.shots_accepted[i] << '\n';
        }
}

std::vector<KernelCurve> read_curves_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "mode,a,x,kappa,shots_requested,shots_accepted")
        throw std::invalid_argument("curves csv: unexpected header");

    std::vector<KernelCurve> curves;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 6)
            throw std::invalid_argument("curves csv: line " + std::to_string(line_no) +
                                        ": expected 6 fields");
        try {
            const Mode mode = mode_from_name(fields[0]);
            const double a = std::stod(fields[1]);
            auto it = std::find_if(curves.begin(), curves.end(), [&](const KernelCurve& c) {
                return c.mode == mode && c.a == a;
            });
            if (it == curves.end()) {
                curves.push_back({mode, a, {}, {}, {}, {}});
                it = std::prev(curves.end());
            }
            it->grid.push_back(std::stod(fields[2]));
            it->values.push_back(std::stod(fields[3]));
            it->shots_requested.push_back(std::stol(fields[4]));
            it->shots_accepted.push_back(std::stol(fields[5]));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("curves csv: line " + std::to_string(line_no) +
                                        ": bad field");
        }
    }
    if (curves.empty()) throw std::invalid_argument("curves csv: no data rows");
    return curves;
}

}  // namespace kernelde::kernel
