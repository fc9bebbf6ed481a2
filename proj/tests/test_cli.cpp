// End-to-end checks of the kernelde binary: output schemas, determinism,
// rerun, exit codes, SVG well-formedness. The binary path arrives in
// KERNELDE_BIN (set by ctest); tests are skipped with a failure if it is
// missing so a bad harness cannot pass silently.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "kernelde/desolve.hpp"
#include "kernelde/kernel.hpp"

namespace fs = std::filesystem;
using namespace kernelde;

namespace {

std::string tool_path()
{
    const char* p = std::getenv("KERNELDE_BIN");
    REQUIRE_MESSAGE(p != nullptr, "KERNELDE_BIN not set");
    return p;
}

int run_tool(const std::string& args)
{
    const std::string cmd = "\"" + tool_path() + "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name)
{
    fs::path d = fs::temp_directory_path() / ("kernelde_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    REQUIRE_MESSAGE(is.good(), ("missing file: " + p.string()));
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Tag-balance scan; the tool emits no comments, CDATA or doctypes.
bool well_formed_xml(const std::string& text)
{
    std::vector<std::string> stack;
    size_t i = 0;
    while ((i = text.find('<', i)) != std::string::npos) {
        const size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?') continue;
        bool closing = tag[0] == '/';
        if (closing) tag = tag.substr(1);
        const bool self_closing = !closing && tag.back() == '/';
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
        if (name.empty()) return false;
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("kernel ideal sweep writes the closed form")
{
    const fs::path dir = fresh_dir("ideal");
    REQUIRE(run_tool("kernel --mode ideal --grid 41 --out " + dir.string()) == 0);

    std::ifstream is(dir / "kernel_ideal.csv");
    auto curves = kernel::read_curves_csv(is);
    REQUIRE(curves.size() == 3);
    for (const auto& c : curves) {
        double best_v = -1, best_x = 0;
        for (size_t i = 0; i < c.grid.size(); ++i)
            if (c.values[i] > best_v) {
                best_v = c.values[i];
                best_x = c.grid[i];
            }
        CHECK(best_x == doctest::Approx(c.a));
        CHECK(best_v == doctest::Approx(1.0).epsilon(1e-8));
    }

    CHECK(well_formed_xml(slurp(dir / "kernel_ideal.svg")));
    const auto man = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(man.at("command") == "kernel");
    CHECK(man.at("outputs").size() == 2);
}

TEST_CASE("repeat runs and manifest reruns are byte-identical")
{
    const fs::path d1 = fresh_dir("det1");
    const fs::path d2 = fresh_dir("det2");
    const std::string flags = "kernel --mode physical --shots 100 --seed 7 --grid 21 --out ";
    REQUIRE(run_tool(flags + d1.string()) == 0);
    REQUIRE(run_tool(flags + d2.string()) == 0);
    CHECK(slurp(d1 / "kernel_physical.csv") == slurp(d2 / "kernel_physical.csv"));
    CHECK(slurp(d1 / "kernel_physical.svg") == slurp(d2 / "kernel_physical.svg"));

    // replaying the manifest overwrites in place with the same bytes
    REQUIRE(run_tool("rerun --manifest " + d1.string()) == 0);
    CHECK(slurp(d1 / "kernel_physical.csv") == slurp(d2 / "kernel_physical.csv"));
}

TEST_CASE("logical sweep reports discards in the acceptance columns")
{
    const fs::path dir = fresh_dir("logical");
    REQUIRE(run_tool("kernel --mode logical --shots 40 --grid 11 --seed 3 --out " +
                     dir.string()) == 0);
    std::ifstream is(dir / "kernel_logical.csv");
    auto curves = kernel::read_curves_csv(is);
    bool some_discard = false;
    for (const auto& c : curves)
        for (size_t i = 0; i < c.grid.size(); ++i) {
            CHECK(c.shots_accepted[i] == 40);  // sampling runs until 40 survive
            if (c.shots_requested[i] > c.shots_accepted[i]) some_discard = true;
        }
    CHECK(some_discard);
}

TEST_CASE("inject at the documented anchors")
{
    const fs::path dir = fresh_dir("inject");
    REQUIRE(run_tool("inject --shots 2000 --trajectories 20000 --seed 5 --out " +
                     dir.string()) == 0);

    const auto dj = nlohmann::json::parse(slurp(dir / "inject_discards.json"));
    CHECK(dj.at("flag_reject_rate").get<double>() == doctest::Approx(0.17).epsilon(0.15));
    CHECK(dj.at("parity_reject_rate").get<double>() == doctest::Approx(0.17).epsilon(0.15));
    CHECK(dj.at("total_discard_rate").get<double>() == doctest::Approx(0.32).epsilon(0.10));

    // physical a=0.5 maximum moves right, the logical one stays put
    std::ifstream pis(dir / "inject_physical.csv");
    std::ifstream lis(dir / "inject_logical.csv");
    auto pcurves = kernel::read_curves_csv(pis);
    auto lcurves = kernel::read_curves_csv(lis);
    auto argmax_at = [](const std::vector<kernel::KernelCurve>& cs, double a) {
        for (const auto& c : cs)
            if (c.a == a) {
                double bx = 0, bv = -1;
                for (size_t i = 0; i < c.grid.size(); ++i)
                    if (c.values[i] > bv) {
                        bv = c.values[i];
                        bx = c.grid[i];
                    }
                return bx;
            }
        return -1.0;
    };
    CHECK(argmax_at(pcurves, 0.5) > 0.5);
    CHECK(std::abs(argmax_at(lcurves, 0.5) - 0.5) <= 0.025 + 1e-12);
    CHECK(well_formed_xml(slurp(dir / "inject_curves.svg")));

    // no injection, no discards
    const fs::path dir0 = fresh_dir("inject0");
    REQUIRE(run_tool("inject --angle-rad 0 --shots 50 --trajectories 5000 --seed 5 --out " +
                     dir0.string()) == 0);
    const auto dj0 = nlohmann::json::parse(slurp(dir0 / "inject_discards.json"));
    CHECK(dj0.at("total_discard_rate").get<double>() == 0.0);
}

TEST_CASE("solve recovers generator coefficients through the file interface")
{
    const fs::path dir = fresh_dir("solve");
    const std::uint64_t seed = 4242;
    {
        std::ofstream os(dir / "problem.json");
        os << desolve::generate_benchmark_de(seed).to_json();
    }
    REQUIRE(run_tool("solve --problem " + (dir / "problem.json").string() +
                     " --basis ideal --out " + dir.string()) == 0);

    const auto pj = nlohmann::json::parse(slurp(dir / "solve_params.json"));
    const auto coeffs = desolve::benchmark_coeffs(seed);
    REQUIRE(pj.at("weights").size() == 3);
    for (int i = 0; i < 3; ++i)
        CHECK(pj.at("weights")[i].get<double>() == doctest::Approx(coeffs.w[i]).epsilon(1e-6));
    CHECK(pj.at("offset").get<double>() == doctest::Approx(coeffs.c).epsilon(1e-6));
    CHECK(slurp(dir / "solve_solution.csv").rfind("x,f_trial", 0) == 0);
}

TEST_CASE("solve accepts a sampled-curves basis")
{
    const fs::path dir = fresh_dir("solve_csv");
    REQUIRE(run_tool("kernel --mode physical --shots 200 --seed 9 --out " + dir.string()) ==
            0);
    {
        std::ofstream os(dir / "problem.json");
        os << desolve::generate_benchmark_de(7).to_json();
    }
    REQUIRE(run_tool("solve --problem " + (dir / "problem.json").string() + " --basis csv:" +
                     (dir / "kernel_physical.csv").string() + " --out " + dir.string()) == 0);
    const auto pj = nlohmann::json::parse(slurp(dir / "solve_params.json"));
    CHECK(pj.at("weights").size() == 3);
    CHECK(std::isfinite(pj.at("loss").get<double>()));

    // a too-sparse basis is a config error
    {
        std::ofstream os(dir / "sparse.csv");
        os << "mode,a,x,kappa,shots_requested,shots_accepted\n";
        for (int i = 0; i < 5; ++i)
            os << "physical,0.5," << i / 4.0 << ",0.5,10,10\n";
    }
    CHECK(run_tool("solve --problem " + (dir / "problem.json").string() + " --basis csv:" +
                   (dir / "sparse.csv").string() + " --out " + dir.string()) == 2);
}

TEST_CASE("usage and config failures exit with 2")
{
    CHECK(run_tool("kernel --mode bogus") == 2);
    CHECK(run_tool("definitely-not-a-subcommand") == 2);
    CHECK(run_tool("solve --problem /nonexistent/problem.json") == 2);
    CHECK(run_tool("inject --logical-anchor nowhere --trajectories 100 --shots 1 --out " +
                   fresh_dir("badanchor").string()) == 2);
    CHECK(run_tool("rerun --manifest /nonexistent/dir") == 2);
}

TEST_CASE("bench on the ideal basis solves everything to numerical noise")
{
    const fs::path dir = fresh_dir("bench");
    REQUIRE(run_tool("bench --n 5 --modes ideal --seed 11 --out " + dir.string()) == 0);
    const auto sj = nlohmann::json::parse(slurp(dir / "bench_summary.json"));
    CHECK(sj.at("modes").at("ideal").at("mean").get<double>() < 1e-3);
    CHECK(sj.at("modes").at("ideal").at("failed").get<long>() == 0);
    CHECK(well_formed_xml(slurp(dir / "bench_hist.svg")));

    // residual rows parse and agree with the summary count
    std::string csv = slurp(dir / "bench_residuals.csv");
    size_t rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 6);  // header + 5 instances
}
