// kernelde: kernel sweeps, DE benchmarks, noise-injection studies and single
// solves from one binary. Every run drops a manifest.json next to its outputs
// and `kernelde rerun --manifest <dir>` replays it byte-for-byte (except the
// manifest's own timestamp).
//
// Exit codes: 0 success, 1 runtime/solver failure, 2 usage or config error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kernelde/circuits.hpp"
#include "kernelde/code422.hpp"
#include "kernelde/desolve.hpp"
#include "kernelde/expr.hpp"
#include "kernelde/kernel.hpp"
#include "kernelde/manifest.hpp"
#include "kernelde/noise.hpp"
#include "kernelde/qsim.hpp"
#include "kernelde/rng.hpp"
#include "kernelde/svg.hpp"

namespace {

using namespace kernelde;
namespace fs = std::filesystem;

// Thrown while inputs are being loaded or validated; maps to exit 2 where
// anything later maps to exit 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int run(std::vector<std::string> args);  // forward, for rerun

std::uint64_t default_seed()
{
    const char* env = std::getenv("KERNELDE_SEED");
    if (!env || !*env) return 1;
    try {
        return std::stoull(env);
    } catch (const std::exception&) {
        throw ConfigError("KERNELDE_SEED is not a number: " + std::string(env));
    }
}

noise::NoiseModel load_noise(const std::string& path, bool ideal)
{
    if (ideal) return noise::zero_noise_model();
    if (path.empty() || path == "default") return noise::default_noise_model();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read noise config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return noise::NoiseModel::from_json(ss.str());
    } catch (const std::exception& e) {
        throw ConfigError("noise config " + path + ": " + e.what());
    }
}

std::vector<double> uniform_grid(int n)
{
    if (n < 2) throw ConfigError("grid needs at least 2 points");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = static_cast<double>(i) / (n - 1);
    return g;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& content,
                std::vector<std::string>& outputs)
{
    fs::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    os << content;
    outputs.push_back(name);
}

std::string csv_num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Deterministic static partition; results land by index, so the outcome is
// independent of the job count.
void parallel_for(int n, int jobs, const std::function<void(int)>& body)
{
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(jobs);
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += jobs) body(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// kernel

struct KernelOpts {
    std::string mode = "physical";
    std::string noise = "default";
    bool ideal = false;
    int grid = 41;
    long shots = 100;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<double> centers = kernel::default_centers();
    std::string out = ".";
    int jobs = 1;
};

svg::Figure overlay_figure(const std::string& title,
                           const std::vector<std::vector<kernel::KernelCurve>>& curve_sets,
                           const std::vector<std::string>& labels,
                           const std::vector<std::string>& colors)
{
    svg::Figure fig;
    fig.title = title;
    const size_t n_centers = curve_sets.front().size();
    for (size_t ci = 0; ci < n_centers; ++ci) {
        svg::Panel panel;
        const double a = curve_sets.front()[ci].a;
        char t[48];
        std::snprintf(t, sizeof t, "a = %g", a);
        panel.title = t;
        panel.x_label = "x";
        panel.y_label = "kernel estimate";

        // rescaled closed form as the reference line, in data coordinates
        const auto& ref = curve_sets.front()[ci];
        kernel::DistortionReport fit = kernel::distortion(ref);
        svg::Series ideal;
        ideal.label = "rescaled ideal";
        ideal.kind = svg::SeriesKind::line;
        ideal.color = "#888888";
        for (int i = 0; i <= 200; ++i) {
            const double x = i / 200.0;
            ideal.xs.push_back(x);
            ideal.ys.push_back((kernel::closed_form(x, a) - fit.shift) / fit.scale);
        }
        panel.series.push_back(std::move(ideal));

        for (size_t s = 0; s < curve_sets.size(); ++s) {
            const auto& c = curve_sets[s][ci];
            svg::Series m;
            m.label = labels[s];
            m.kind = svg::SeriesKind::markers;
            m.color = colors[s % colors.size()];
            m.xs = c.grid;
            m.ys = c.values;
            panel.series.push_back(std::move(m));
        }
        fig.panels.push_back(std::move(panel));
    }
    return fig;
}

int cmd_kernel(const KernelOpts& o, const std::vector<std::string>& argv)
{
    const kernel::Mode mode = kernel::mode_from_name(o.mode);
    const noise::NoiseModel m = load_noise(o.noise, o.ideal || mode == kernel::Mode::ideal);
    const std::vector<double> grid = uniform_grid(o.grid);

    auto curves = kernel::sweep_curves(mode, o.centers, grid, o.shots, m, o.seed);

    std::vector<std::string> outputs;
    const std::string base = "kernel_" + o.mode;
    std::ostringstream csv;
    kernel::write_curves_csv(csv, curves);
    write_text(o.out, base + ".csv", csv.str(), outputs);

    svg::Figure fig = overlay_figure("kernel sweep (" + o.mode + ")", {curves},
                                     {o.mode + " estimate"}, {"#1f6fb2"});
    write_text(o.out, base + ".svg", svg::render(fig), outputs);

    nlohmann::ordered_json cfg;
    cfg["mode"] = o.mode;
    cfg["noise"] = o.ideal || mode == kernel::Mode::ideal ? "ideal" : o.noise;
    cfg["grid"] = o.grid;
    cfg["shots"] = o.shots;
    cfg["centers"] = o.centers;
    cfg["jobs"] = o.jobs;
    manifest::RunManifest man;
    man.command = "kernel";
    man.argv = argv;
    man.config_json = cfg.dump();
    man.seed = o.seed;
    man.outputs = outputs;
    manifest::save(man, o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
    long n = 100;
    std::string modes = "physical,logical";
    std::string noise = "default";
    int grid = 41;
    long shots = 100;
    std::uint64_t seed = 0;
    std::string out = ".";
    int jobs = 1;
};

int cmd_bench(const BenchOpts& o, const std::vector<std::string>& argv)
{
    if (o.n < 1) throw ConfigError("bench needs --n >= 1");
    std::vector<std::string> mode_names;
    {
        std::stringstream ss(o.modes);
        std::string tok;
        while (std::getline(ss, tok, ',')) mode_names.push_back(tok);
    }
    if (mode_names.empty()) throw ConfigError("no modes given");
    for (const auto& name : mode_names) kernel::mode_from_name(name);  // validate early

    const noise::NoiseModel m = load_noise(o.noise, false);
    const std::vector<double> grid = uniform_grid(o.grid);

    // one basis per mode, shared by every instance; sweep seeds are paired
    // off the run seed so physical and logical see distinct streams
    std::vector<desolve::BasisSet> bases;
    for (size_t mi = 0; mi < mode_names.size(); ++mi) {
        const kernel::Mode mode = kernel::mode_from_name(mode_names[mi]);
        if (mode == kernel::Mode::ideal) {
            bases.push_back(desolve::BasisSet::ideal());
        } else {
            auto curves = kernel::sweep_curves(mode, kernel::default_centers(), grid, o.shots,
                                               m, o.seed + 1 + mi);
            bases.push_back(desolve::BasisSet::from_curves(curves, 1e-3));
        }
    }

    struct Row {
        std::uint64_t de_seed;
        std::vector<double> residuals;
    };
    std::vector<Row> rows(o.n);
    parallel_for(static_cast<int>(o.n), o.jobs, [&](int i) {
        Row& row = rows[i];
        row.de_seed = o.seed + 1000 + static_cast<std::uint64_t>(i);
        const auto prob = desolve::generate_benchmark_de(row.de_seed);
        const auto exact = [&](double x) { return desolve::benchmark_solution(row.de_seed, x); };
        for (const auto& basis : bases) {
            double r = std::numeric_limits<double>::quiet_NaN();
            try {
                r = desolve::residual(desolve::solve_linear(prob, basis).model, exact);
            } catch (const std::exception&) {
                // recorded as NaN, the batch keeps going
            }
            row.residuals.push_back(r);
        }
    });

    std::vector<std::string> outputs;
    std::ostringstream csv;
    csv << "instance,de_seed";
    for (const auto& name : mode_names) csv << ',' << name;
    csv << '\n';
    for (long i = 0; i < o.n; ++i) {
        csv << i << ',' << rows[i].de_seed;
        for (double r : rows[i].residuals) csv << ',' << csv_num(r);
        csv << '\n';
    }
    write_text(o.out, "bench_residuals.csv", csv.str(), outputs);

    nlohmann::ordered_json summary;
    summary["n"] = o.n;
    for (size_t mi = 0; mi < mode_names.size(); ++mi) {
        std::vector<double> rs;
        long failed = 0;
        for (const auto& row : rows) {
            if (std::isfinite(row.residuals[mi]))
                rs.push_back(row.residuals[mi]);
            else
                ++failed;
        }
        nlohmann::ordered_json entry;
        if (!rs.empty()) {
            std::sort(rs.begin(), rs.end());
            double mean = 0;
            for (double r : rs) mean += r;
            entry["mean"] = mean / rs.size();
            entry["median"] = rs[rs.size() / 2];
        }
        entry["failed"] = failed;
        summary["modes"][mode_names[mi]] = entry;
    }
    write_text(o.out, "bench_summary.json", summary.dump(2) + "\n", outputs);

    // shared-bin histogram across modes
    double rmax = 0;
    for (const auto& row : rows)
        for (double r : row.residuals)
            if (std::isfinite(r)) rmax = std::max(rmax, r);
    if (rmax <= 0) rmax = 1;
    const int n_bins = 20;
    const double bw = rmax / n_bins * 1.0000001;
    svg::Figure fig;
    fig.title = "DE benchmark residuals";
    svg::Panel panel;
    panel.x_label = "normalized residual";
    panel.y_label = "instances";
    const char* colors[] = {"#1f6fb2", "#d1495b", "#3a7d44", "#9b6a2f"};
    for (size_t mi = 0; mi < mode_names.size(); ++mi) {
        svg::Series bars;
        bars.label = mode_names[mi];
        bars.kind = svg::SeriesKind::bars;
        bars.color = colors[mi % 4];
        bars.bar_width = bw * 0.9 / mode_names.size();
        std::vector<long> counts(n_bins, 0);
        for (const auto& row : rows)
            if (std::isfinite(row.residuals[mi]))
                ++counts[std::min(n_bins - 1, static_cast<int>(row.residuals[mi] / bw))];
        for (int b = 0; b < n_bins; ++b) {
            bars.xs.push_back((b + 0.5) * bw + (mi + 0.5 - mode_names.size() / 2.0) *
                                                   bars.bar_width);
            bars.ys.push_back(static_cast<double>(counts[b]));
        }
        panel.series.push_back(std::move(bars));
    }
    fig.panels.push_back(std::move(panel));
    fig.panel_width = 520;
    write_text(o.out, "bench_hist.svg", svg::render(fig), outputs);

    nlohmann::ordered_json cfg;
    cfg["n"] = o.n;
    cfg["modes"] = o.modes;
    cfg["noise"] = o.noise;
    cfg["grid"] = o.grid;
    cfg["shots"] = o.shots;
    cfg["jobs"] = o.jobs;
    manifest::RunManifest man;
    man.command = "bench";
    man.argv = argv;
    man.config_json = cfg.dump();
    man.seed = o.seed;
    man.outputs = outputs;
    manifest::save(man, o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// inject

struct InjectOpts {
    double angle_rad = 0.6283;
    std::string axis = "-Y";
    std::string phys_anchor = "mid_beta";
    std::string logical_anchor = "mid_proxy_beta";
    int grid = 41;
    long shots = 100;
    long trajectories = 100000;
    std::uint64_t seed = 0;
    std::string out = ".";
    int jobs = 1;
};

qsim::GateKind axis_kind(const std::string& axis, double& sign)
{
    std::string ax = axis;
    sign = 1.0;
    if (!ax.empty() && (ax[0] == '-' || ax[0] == '+')) {
        if (ax[0] == '-') sign = -1.0;
        ax = ax.substr(1);
    }
    if (ax == "X" || ax == "x") return qsim::GateKind::RX;
    if (ax == "Y" || ax == "y") return qsim::GateKind::RY;
    if (ax == "Z" || ax == "z") return qsim::GateKind::RZ;
    throw ConfigError("axis must be one of X, Y, Z with optional sign, got " + axis);
}

// The injection study isolates the injected rotation: everything else runs
// noiseless, so each circuit has a single exact readout distribution and
// trajectories reduce to categorical draws from it.
struct InjectPoint {
    Eigen::VectorXd dist;
};

int cmd_inject(const InjectOpts& o, const std::vector<std::string>& argv)
{
    double sign = 1.0;
    const qsim::GateKind kind = axis_kind(o.axis, sign);
    const double angle = sign * o.angle_rad;
    const std::vector<double> grid = uniform_grid(o.grid);
    const std::vector<double> centers = kernel::default_centers();
    const int n_pts = static_cast<int>(centers.size() * grid.size());

    // validate anchors before any work
    {
        circuits::Circuit p = circuits::build_physical_kernel(0.5, 0.5);
        if (!p.anchors.count(o.phys_anchor))
            throw ConfigError("unknown physical anchor " + o.phys_anchor);
        circuits::Circuit l = circuits::build_logical_kernel(0.5, 0.5);
        if (!l.anchors.count(o.logical_anchor))
            throw ConfigError("unknown logical anchor " + o.logical_anchor);
    }

    std::vector<InjectPoint> phys(n_pts), logi(n_pts);
    parallel_for(n_pts, o.jobs, [&](int i) {
        const double a = centers[i / grid.size()];
        const double x = grid[i % grid.size()];
        {
            circuits::Circuit c = circuits::build_physical_kernel(x, a);
            if (o.angle_rad != 0.0)
                c = noise::inject_zone_rotation(c, o.phys_anchor, kind, angle);
            qsim::QuditState s = qsim::QuditState::pure_zero(2);
            qsim::run_circuit(s, c);
            phys[i].dist = qsim::readout_distribution(s, {0, 1});
        }
        {
            circuits::Circuit c = circuits::build_logical_kernel(x, a);
            if (o.angle_rad != 0.0)
                c = noise::inject_zone_rotation(c, o.logical_anchor, kind, angle);
            qsim::QuditState s = qsim::QuditState::pure_zero(6);
            qsim::run_circuit(s, c);
            logi[i].dist = qsim::readout_distribution(s, {0, 1, 2, 3, 4, 5});
        }
    });

    auto draw = [](const Eigen::VectorXd& dist, rng::Stream& st) {
        double u = st.uniform() * dist.sum();
        for (int r = 0; r < dist.size(); ++r) {
            u -= dist(r);
            if (u <= 0) return r;
        }
        return static_cast<int>(dist.size()) - 1;
    };

    // sampled curves at --shots per point
    std::vector<kernel::KernelCurve> pcurves, lcurves;
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        kernel::KernelCurve pc{kernel::Mode::physical, centers[ci], grid, {}, {}, {}};
        kernel::KernelCurve lc{kernel::Mode::logical, centers[ci], grid, {}, {}, {}};
        for (size_t gi = 0; gi < grid.size(); ++gi) {
            const int i = static_cast<int>(ci * grid.size() + gi);
            rng::Stream ps = rng::shot_stream(o.seed, 0x9100 + i, 0);
            long n00 = 0;
            for (long s = 0; s < o.shots; ++s)
                if (draw(phys[i].dist, ps) == 0) ++n00;
            pc.values.push_back(static_cast<double>(n00) / o.shots);
            pc.shots_requested.push_back(o.shots);
            pc.shots_accepted.push_back(o.shots);

            rng::Stream ls = rng::shot_stream(o.seed, 0x9200 + i, 0);
            long acc = 0, good = 0;
            for (long s = 0; s < o.shots; ++s) {
                auto d = code422::decode(static_cast<std::uint32_t>(draw(logi[i].dist, ls)), 6);
                if (!d.accepted) continue;
                ++acc;
                if (d.b1 == 0 && d.b2 == 0) ++good;
            }
            lc.values.push_back(acc > 0 ? static_cast<double>(good) / acc : 0.0);
            lc.shots_requested.push_back(o.shots);
            lc.shots_accepted.push_back(acc);
        }
        pcurves.push_back(std::move(pc));
        lcurves.push_back(std::move(lc));
    }

    // discard accounting over the full trajectory budget, spread evenly over
    // the sweep; parity is quoted as the fraction of ancilla-stage survivors
    const long per_point = std::max(1L, o.trajectories / n_pts);
    double flag_sum = 0, parity_sum = 0, total_sum = 0;
    std::vector<double> flag_pt(n_pts), par_pt(n_pts), tot_pt(n_pts);
    parallel_for(n_pts, o.jobs, [&](int i) {
        rng::Stream st = rng::shot_stream(o.seed, 0x9300 + i, 0);
        long flag = 0, parity = 0;
        for (long s = 0; s < per_point; ++s) {
            auto d = code422::decode(static_cast<std::uint32_t>(draw(logi[i].dist, st)), 6);
            if (d.accepted) continue;
            if (d.reject_reason == code422::Reject::flag)
                ++flag;
            else
                ++parity;
        }
        flag_pt[i] = static_cast<double>(flag) / per_point;
        par_pt[i] = flag < per_point
                        ? static_cast<double>(parity) / (per_point - flag)
                        : 0.0;
        tot_pt[i] = static_cast<double>(flag + parity) / per_point;
    });
    for (int i = 0; i < n_pts; ++i) {
        flag_sum += flag_pt[i];
        parity_sum += par_pt[i];
        total_sum += tot_pt[i];
    }

    std::vector<std::string> outputs;
    std::ostringstream pcsv, lcsv;
    kernel::write_curves_csv(pcsv, pcurves);
    kernel::write_curves_csv(lcsv, lcurves);
    write_text(o.out, "inject_physical.csv", pcsv.str(), outputs);
    write_text(o.out, "inject_logical.csv", lcsv.str(), outputs);

    nlohmann::ordered_json dj;
    dj["angle_rad"] = o.angle_rad;
    dj["axis"] = o.axis;
    dj["physical_anchor"] = o.phys_anchor;
    dj["logical_anchor"] = o.logical_anchor;
    dj["trajectories"] = per_point * n_pts;
    dj["flag_reject_rate"] = flag_sum / n_pts;
    dj["parity_reject_rate"] = parity_sum / n_pts;
    dj["total_discard_rate"] = total_sum / n_pts;
    dj["accounting"] =
        "sweep-averaged; parity rate is the fraction of ancilla-stage survivors";
    write_text(o.out, "inject_discards.json", dj.dump(2) + "\n", outputs);

    svg::Figure fig = overlay_figure("noise injection", {pcurves, lcurves},
                                     {"physical", "logical"}, {"#d1495b", "#1f6fb2"});
    write_text(o.out, "inject_curves.svg", svg::render(fig), outputs);

    nlohmann::ordered_json cfg;
    cfg["angle_rad"] = o.angle_rad;
    cfg["axis"] = o.axis;
    cfg["physical_anchor"] = o.phys_anchor;
    cfg["logical_anchor"] = o.logical_anchor;
    cfg["grid"] = o.grid;
    cfg["shots"] = o.shots;
    cfg["trajectories"] = o.trajectories;
    cfg["jobs"] = o.jobs;
    manifest::RunManifest man;
    man.command = "inject";
    man.argv = argv;
    man.config_json = cfg.dump();
    man.seed = o.seed;
    man.outputs = outputs;
    manifest::save(man, o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// solve

struct SolveOpts {
    std::string problem;
    std::string basis = "ideal";
    std::string exact;
    double f0_override = std::numeric_limits<double>::quiet_NaN();
    std::string out = ".";
    std::uint64_t seed = 0;
};

int cmd_solve(const SolveOpts& o, const std::vector<std::string>& argv)
{
    std::ifstream is(o.problem, std::ios::binary);
    if (!is) throw ConfigError("cannot read problem file " + o.problem);
    std::stringstream ss;
    ss << is.rdbuf();
    desolve::DEProblem prob;
    try {
        prob = desolve::DEProblem::from_json(ss.str());
    } catch (const std::exception& e) {
        throw ConfigError("problem file " + o.problem + ": " + e.what());
    }
    if (!std::isnan(o.f0_override)) prob.f0 = o.f0_override;

    desolve::BasisSet basis = desolve::BasisSet::ideal();
    if (o.basis == "ideal") {
        // closed-form slices with analytic derivatives
    } else if (o.basis.rfind("csv:", 0) == 0) {
        const std::string path = o.basis.substr(4);
        std::ifstream cs(path, std::ios::binary);
        if (!cs) throw ConfigError("cannot read basis csv " + path);
        std::vector<kernel::KernelCurve> curves;
        try {
            curves = kernel::read_curves_csv(cs);
        } catch (const std::exception& e) {
            throw ConfigError("basis csv " + path + ": " + e.what());
        }
        for (const auto& c : curves)
            if (c.grid.size() < 10)
                throw ConfigError("basis csv " + path + ": grid too sparse (< 10 points)");
        basis = desolve::BasisSet::from_curves(curves, 1e-3);
    } else {
        throw ConfigError("--basis must be 'ideal' or 'csv:<path>'");
    }

    std::optional<expr::Expr> exact;
    if (!o.exact.empty()) {
        try {
            exact = expr::Expr::parse(o.exact);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--exact: ") + e.what());
        }
    }

    auto result = desolve::solve_linear(prob, basis);

    std::vector<std::string> outputs;
    std::ostringstream csv;
    csv << (exact ? "x,f_trial,f_exact\n" : "x,f_trial\n");
    for (int i = 0; i <= 200; ++i) {
        const double x = i / 200.0;
        csv << csv_num(x) << ',' << csv_num(result.model.value(x));
        if (exact) csv << ',' << csv_num(exact->eval(x, 0, 0));
        csv << '\n';
    }
    write_text(o.out, "solve_solution.csv", csv.str(), outputs);

    nlohmann::ordered_json pj;
    pj["weights"] = result.model.weights;
    pj["offset"] = result.model.offset;
    pj["rank_deficient"] = result.rank_deficient;
    pj["loss"] = desolve::loss(result.model, prob);
    if (exact) {
        const auto& ex = *exact;
        pj["residual"] =
            desolve::residual(result.model, [&](double x) { return ex.eval(x, 0, 0); });
    }
    write_text(o.out, "solve_params.json", pj.dump(2) + "\n", outputs);

    nlohmann::ordered_json cfg;
    cfg["problem"] = o.problem;
    cfg["basis"] = o.basis;
    cfg["exact"] = o.exact;
    if (!std::isnan(o.f0_override)) cfg["f0_override"] = o.f0_override;
    manifest::RunManifest man;
    man.command = "solve";
    man.argv = argv;
    man.config_json = cfg.dump();
    man.seed = o.seed;
    man.outputs = outputs;
    manifest::save(man, o.out);
    return 0;
}

// ---------------------------------------------------------------------------

int run(std::vector<std::string> args)
{
    CLI::App app{"kernel estimation and differential-equation solving toolkit"};
    app.require_subcommand(1);

    KernelOpts ko;
    auto* k = app.add_subcommand("kernel", "sweep kernel curves over the x grid");
    k->add_option("--mode", ko.mode, "ideal, physical or logical")
        ->check(CLI::IsMember({"ideal", "physical", "logical"}));
    k->add_option("--noise", ko.noise, "noise config JSON, or 'default'");
    k->add_flag("--ideal", ko.ideal, "shorthand for the zero noise model");
    k->add_option("--grid", ko.grid, "number of x points");
    k->add_option("--shots", ko.shots, "shots per grid point");
    k->add_option("--seed", ko.seed, "run seed")->capture_default_str();
    k->add_option("--centers", ko.centers, "kernel centers a");
    k->add_option("--out", ko.out, "output directory");
    k->add_option("--jobs", ko.jobs, "worker threads");

    BenchOpts bo;
    auto* b = app.add_subcommand("bench", "batch-solve random DEs on kernel bases");
    b->add_option("--n", bo.n, "number of DE instances");
    b->add_option("--modes", bo.modes, "comma list of bases to compare");
    b->add_option("--noise", bo.noise, "noise config JSON, or 'default'");
    b->add_option("--grid", bo.grid, "sweep grid size");
    b->add_option("--shots", bo.shots, "accepted shots per grid point");
    b->add_option("--seed", bo.seed, "run seed");
    b->add_option("--out", bo.out, "output directory");
    b->add_option("--jobs", bo.jobs, "worker threads");

    InjectOpts io;
    auto* in = app.add_subcommand("inject", "study one injected coherent rotation");
    in->add_option("--angle-rad", io.angle_rad, "rotation angle in radians");
    in->add_option("--axis", io.axis, "X, Y or Z with optional sign, e.g. -Y");
    in->add_option("--phys-anchor", io.phys_anchor, "physical circuit anchor");
    in->add_option("--logical-anchor", io.logical_anchor, "logical circuit anchor");
    in->add_option("--grid", io.grid, "number of x points");
    in->add_option("--shots", io.shots, "shots per curve point");
    in->add_option("--trajectories", io.trajectories, "total shots for discard stats");
    in->add_option("--seed", io.seed, "run seed");
    in->add_option("--out", io.out, "output directory");
    in->add_option("--jobs", io.jobs, "worker threads");

    SolveOpts so;
    auto* s = app.add_subcommand("solve", "solve one DE problem file");
    s->add_option("--problem", so.problem, "DE problem JSON")->required();
    s->add_option("--basis", so.basis, "'ideal' or 'csv:<curves file>'");
    s->add_option("--exact", so.exact, "exact solution expression in x");
    s->add_option("--f0", so.f0_override, "override the boundary value");
    s->add_option("--out", so.out, "output directory");
    s->add_option("--seed", so.seed, "recorded in the manifest");

    std::string rerun_path;
    auto* r = app.add_subcommand("rerun", "replay a recorded run");
    r->add_option("--manifest", rerun_path, "manifest.json or its directory")->required();

    std::vector<std::string> cli11_args(args.rbegin(), args.rend());  // CLI11 pops from the back
    try {
        app.parse(cli11_args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::uint64_t env_seed = default_seed();
    if (k->parsed() && k->count("--seed") == 0) ko.seed = env_seed;
    if (b->parsed() && b->count("--seed") == 0) bo.seed = env_seed;
    if (in->parsed() && in->count("--seed") == 0) io.seed = env_seed;
    if (s->parsed() && s->count("--seed") == 0) so.seed = env_seed;

    try {
        if (k->parsed()) return cmd_kernel(ko, args);
        if (b->parsed()) return cmd_bench(bo, args);
        if (in->parsed()) return cmd_inject(io, args);
        if (s->parsed()) return cmd_solve(so, args);
        if (r->parsed()) {
            manifest::RunManifest man;
            try {
                man = manifest::load(rerun_path);
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
            return run(man.argv);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(std::move(args));
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
