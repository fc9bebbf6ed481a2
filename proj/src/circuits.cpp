#include "kernelde/circuits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace kernelde::circuits {

using qsim::Gate;
using qsim::GateKind;

namespace {
constexpr double pi = 3.14159265358979323846;
}

// ---------------------------------------------------------------------------
// Instruction factories

Instruction Instruction::make_gate(qsim::Gate g)
{
    Instruction ins;
    ins.kind = Kind::gate;
    ins.gate = std::move(g);
    return ins;
}

Instruction Instruction::make_channel(qsim::KrausChannel ch)
{
    Instruction ins;
    ins.kind = Kind::channel;
    ins.chan = std::move(ch);
    return ins;
}

Instruction Instruction::make_move_in(int site)
{
    Instruction ins;
    ins.kind = Kind::move_in;
    ins.site = site;
    return ins;
}

Instruction Instruction::make_move_out(int site)
{
    Instruction ins;
    ins.kind = Kind::move_out;
    ins.site = site;
    return ins;
}

Instruction Instruction::make_measure(std::vector<int> sites)
{
    Instruction ins;
    ins.kind = Kind::measure;
    ins.sites = std::move(sites);
    return ins;
}

// ---------------------------------------------------------------------------
// Circuit

void Circuit::validate() const
{
    if (n_sites < 1 || n_sites > qsim::max_pure_sites)
        throw std::invalid_argument("circuit site count out of range");
    if (static_cast<int>(start_in_zone.size()) != n_sites)
        throw std::invalid_argument("start_in_zone size mismatch");

    std::vector<bool> in_zone = start_in_zone;
    bool measured = false;
    for (size_t i = 0; i < instrs.size(); ++i) {
        const Instruction& ins = instrs[i];
        auto fail = [&](const std::string& what) {
            throw std::invalid_argument("instruction " + std::to_string(i) + ": " + what);
        };
        if (measured && ins.kind != Instruction::Kind::measure)
            fail("operations after measurement");
        switch (ins.kind) {
            case Instruction::Kind::gate: {
                const Gate& g = ins.gate;
                for (int t : g.targets) {
                    if (t < 0 || t >= n_sites) fail("gate target out of range");
                    if (!in_zone[t]) fail("gate on a site in storage");
                }
                if (qsim::is_global_kind(g.kind)) {
                    // a global pulse hits the whole computation zone, no less
                    std::set<int> listed(g.targets.begin(), g.targets.end());
                    for (int s = 0; s < n_sites; ++s)
                        if (in_zone[s] != (listed.count(s) > 0))
                            fail("global gate targets differ from the zone contents");
                }
                break;
            }
            case Instruction::Kind::channel:
                // noise may hit storage sites too (idling, moves)
                for (int t : ins.chan.targets)
                    if (t < 0 || t >= n_sites) fail("channel target out of range");
                break;
            case Instruction::Kind::move_in:
                if (ins.site < 0 || ins.site >= n_sites) fail("move site out of range");
                if (in_zone[ins.site]) fail("move_in on a site already in the zone");
                in_zone[ins.site] = true;
                break;
            case Instruction::Kind::move_out:
                if (ins.site < 0 || ins.site >= n_sites) fail("move site out of range");
                if (!in_zone[ins.site]) fail("move_out on a site already in storage");
                in_zone[ins.site] = false;
                break;
            case Instruction::Kind::measure:
                for (int s : ins.sites)
                    if (s < 0 || s >= n_sites) fail("measured site out of range");
                measured = true;
                break;
        }
    }
}

std::vector<bool> Circuit::zone_mask_at(int index) const
{
    std::vector<bool> in_zone = start_in_zone;
    for (int i = 0; i < index && i < static_cast<int>(instrs.size()); ++i) {
        if (instrs[i].kind == Instruction::Kind::move_in) in_zone[instrs[i].site] = true;
        if (instrs[i].kind == Instruction::Kind::move_out) in_zone[instrs[i].site] = false;
    }
    return in_zone;
}

std::vector<int> Circuit::measured_sites() const
{
    std::set<int> sites;
    for (const auto& ins : instrs)
        if (ins.kind == Instruction::Kind::measure)
            sites.insert(ins.sites.begin(), ins.sites.end());
    return {sites.begin(), sites.end()};
}

std::string Circuit::dump() const
{
    std::ostringstream out;
    std::vector<bool> in_zone = start_in_zone;
    auto zone_str = [&]() {
        std::string z(n_sites, '0');
        for (int s = 0; s < n_sites; ++s)
            if (in_zone[s]) z[s] = '1';
        return z;
    };
    for (size_t i = 0; i < instrs.size(); ++i) {
        const Instruction& ins = instrs[i];
        std::string kind, targets = "-", angle = "-";
        auto join = [](const std::vector<int>& v) {
            std::string s;
            for (size_t k = 0; k < v.size(); ++k)
                s += (k ? "," : "") + std::to_string(v[k]);
            return s;
        };
        switch (ins.kind) {
            case Instruction::Kind::gate:
                kind = qsim::kind_name(ins.gate.kind);
                targets = join(ins.gate.targets);
                if (qsim::is_rotation_kind(ins.gate.kind)) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%+.9g", ins.gate.angle);
                    angle = buf;
                }
                break;
            case Instruction::Kind::channel:
                kind = "CHAN";
                targets = join(ins.chan.targets);
                break;
            case Instruction::Kind::move_in:
                kind = "MOVEIN";
                targets = std::to_string(ins.site);
                break;
            case Instruction::Kind::move_out:
                kind = "MOVEOUT";
                targets = std::to_string(ins.site);
                break;
            case Instruction::Kind::measure:
                kind = "MEASURE";
                targets = join(ins.sites);
                break;
        }
        out << i << ' ' << kind << ' ' << targets << ' ' << angle << ' ' << zone_str()
            << '\n';
        if (ins.kind == Instruction::Kind::move_in) in_zone[ins.site] = true;
        if (ins.kind == Instruction::Kind::move_out) in_zone[ins.site] = false;
    }
    return out.str();
}

bool native_conformant(const Circuit& c)
{
    for (const auto& ins : c.instrs) {
        if (ins.kind != Instruction::Kind::gate)
            continue;
        switch (ins.gate.kind) {
            case GateKind::GlobalRX:
            case GateKind::GlobalH:
            case GateKind::GlobalZ:
            case GateKind::Z:
            case GateKind::CZ:
                break;
            default:
                return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Kernel circuits

KernelParams kernel_params(double x, double a)
{
    KernelParams p;
    p.x = x;
    p.a = a;
    p.alpha = 2 * pi * x * x;
    p.beta = 2 * pi * (x - a);
    p.gamma = -2 * pi * a * a;
    return p;
}

namespace {

void g(Circuit& c, GateKind k, std::vector<int> t, double angle = 0.0)
{
    c.instrs.push_back(Instruction::make_gate(Gate{k, std::move(t), angle}));
}

}  // namespace

Circuit build_u(double x)
{
    Circuit c;
    c.n_sites = 2;
    c.start_in_zone = {true, true};
    g(c, GateKind::RX, {0}, 2 * pi * x * x);
    g(c, GateKind::CNOT, {0, 1});
    g(c, GateKind::RX, {0}, 2 * pi * x);
    c.instrs.push_back(Instruction::make_measure({0, 1}));
    c.validate();
    return c;
}

Circuit build_u_dagger_u(double x, double a)
{
    const KernelParams p = kernel_params(x, a);
    Circuit c;
    c.n_sites = 2;
    c.start_in_zone = {true, true};
    // the adjacent RX(2 pi x), RX(-2 pi a) merge into one beta rotation
    g(c, GateKind::RX, {0}, p.alpha);
    g(c, GateKind::CNOT, {0, 1});
    g(c, GateKind::RX, {0}, p.beta);
    g(c, GateKind::CNOT, {0, 1});
    g(c, GateKind::RX, {0}, p.gamma);
    c.instrs.push_back(Instruction::make_measure({0, 1}));
    c.validate();
    return c;
}

Circuit build_physical_kernel(double x, double a)
{
    const KernelParams p = kernel_params(x, a);
    Circuit c;
    c.n_sites = 2;
    c.start_in_zone = {true, false};
    c.anchors["after_prep"] = 0;

    g(c, GateKind::GlobalRX, {0}, p.alpha);
    g(c, GateKind::Z, {0});
    g(c, GateKind::GlobalH, {0});
    c.instrs.push_back(Instruction::make_move_in(1));
    g(c, GateKind::GlobalH, {0, 1});
    g(c, GateKind::GlobalZ, {0, 1});
    g(c, GateKind::CZ, {0, 1});
    g(c, GateKind::GlobalRX, {0, 1}, p.beta / 2);
    g(c, GateKind::Z, {1});
    c.anchors["mid_beta"] = static_cast<int>(c.instrs.size());
    g(c, GateKind::GlobalRX, {0, 1}, p.beta / 2);
    g(c, GateKind::CZ, {0, 1});
    g(c, GateKind::GlobalH, {0, 1});
    c.instrs.push_back(Instruction::make_move_out(1));
    g(c, GateKind::GlobalH, {0});
    g(c, GateKind::GlobalRX, {0}, p.gamma);
    c.anchors["before_measure"] = static_cast<int>(c.instrs.size());
    c.instrs.push_back(Instruction::make_measure({0, 1}));
    c.validate();
    return c;
}

Circuit build_logical_kernel_reference(double x, double a)
{
    const KernelParams p = kernel_params(x, a);
    Circuit c;
    c.n_sites = 6;
    c.start_in_zone = std::vector<bool>(6, true);

    // flagged |00>_L preparation: GHZ over the data block via the flag site,
    // then the flag checks the X stabilizer
    g(c, GateKind::H, {4});
    for (int t : {0, 1, 2, 3}) g(c, GateKind::CNOT, {4, t});
    g(c, GateKind::CNOT, {0, 4});
    c.anchors["after_prep"] = static_cast<int>(c.instrs.size());

    // exp(-i theta/2 X0 X2) through the rotation ancilla
    auto proxy = [&](double theta) {
        g(c, GateKind::H, {5});
        g(c, GateKind::CNOT, {5, 0});
        g(c, GateKind::CNOT, {5, 2});
        g(c, GateKind::RX, {5}, theta);
        g(c, GateKind::CNOT, {5, 2});
        g(c, GateKind::CNOT, {5, 0});
        g(c, GateKind::H, {5});
    };
    proxy(p.alpha);
    g(c, GateKind::SWAP, {0, 1});  // encoded CNOT
    proxy(p.beta);
    g(c, GateKind::SWAP, {0, 1});
    proxy(p.gamma);
    c.anchors["before_measure"] = static_cast<int>(c.instrs.size());
    c.instrs.push_back(Instruction::make_measure({0, 1, 2, 3, 4, 5}));
    c.validate();
    return c;
}

Circuit build_logical_kernel(double x, double a)
{
    const KernelParams p = kernel_params(x, a);
    Circuit c;
    c.n_sites = 6;
    c.start_in_zone = {true, true, true, true, true, false};

    const std::vector<int> prep_zone = {0, 1, 2, 3, 4};
    const std::vector<int> run_zone = {0, 1, 2, 5};

    g(c, GateKind::GlobalH, prep_zone);
    for (int t : {0, 1, 2, 3}) g(c, GateKind::CZ, {t, 4});
    c.anchors["mid_ghz"] = static_cast<int>(c.instrs.size());
    g(c, GateKind::GlobalH, prep_zone);
    c.anchors["pre_flag"] = static_cast<int>(c.instrs.size());
    g(c, GateKind::CZ, {0, 4});
    g(c, GateKind::GlobalH, prep_zone);
    c.anchors["after_flag"] = static_cast<int>(c.instrs.size());
    c.instrs.push_back(Instruction::make_move_out(4));
    g(c, GateKind::GlobalH, {0, 1, 2, 3});
    c.anchors["after_prep"] = static_cast<int>(c.instrs.size());
    c.instrs.push_back(Instruction::make_move_out(3));
    g(c, GateKind::GlobalRX, {0, 1, 2}, pi);
    c.instrs.push_back(Instruction::make_move_in(5));
    c.anchors["before_U"] = static_cast<int>(c.instrs.size());
    g(c, GateKind::GlobalH, run_zone);
    g(c, GateKind::GlobalZ, run_zone);

    // each rotation: CZ dressing onto the ancilla, echoed half-pulses
    auto halves = [&](double first, double second, const char* mid_anchor) {
        g(c, GateKind::GlobalRX, run_zone, first);
        g(c, GateKind::Z, {5});
        c.anchors[mid_anchor] = static_cast<int>(c.instrs.size());
        g(c, GateKind::GlobalRX, run_zone, second);
    };
    // block supports follow the encoded-CNOT frame changes: the middle rotation
    // acts on the swapped pair.  Site 2 sits in every support, so its dressing
    // CZ is applied once and undone only at the end.
    g(c, GateKind::CZ, {0, 5});
    g(c, GateKind::CZ, {2, 5});
    halves(-p.alpha / 2, p.alpha / 2, "mid_proxy_alpha");
    g(c, GateKind::CZ, {0, 5});
    g(c, GateKind::CZ, {1, 5});
    halves(p.beta / 2, -p.beta / 2, "mid_proxy_beta");
    g(c, GateKind::CZ, {1, 5});
    g(c, GateKind::CZ, {0, 5});
    halves(-p.gamma / 2, p.gamma / 2, "mid_proxy_gamma");
    g(c, GateKind::CZ, {2, 5});
    g(c, GateKind::CZ, {0, 5});

    g(c, GateKind::GlobalH, run_zone);
    c.anchors["before_measure"] = static_cast<int>(c.instrs.size());
    c.instrs.push_back(Instruction::make_measure({0, 1, 2, 3, 4, 5}));
    c.validate();
    return c;
}

CompilationReport verify_compilation(const Circuit& compiled, const Circuit& reference)
{
    if (compiled.n_sites != reference.n_sites)
        throw std::invalid_argument("verify_compilation: site count mismatch");
    const std::vector<int> sites_c = compiled.measured_sites();
    const std::vector<int> sites_r = reference.measured_sites();
    if (sites_c != sites_r)
        throw std::invalid_argument("verify_compilation: measured sites differ");

    qsim::QuditState sc = qsim::QuditState::pure_zero(compiled.n_sites);
    qsim::run_circuit(sc, compiled);
    qsim::QuditState sr = qsim::QuditState::pure_zero(reference.n_sites);
    qsim::run_circuit(sr, reference);

    CompilationReport rep;
    rep.max_deviation = (qsim::readout_distribution(sc, sites_c) -
                         qsim::readout_distribution(sr, sites_r))
                            .cwiseAbs()
                            .maxCoeff();
    return rep;
}

}  // namespace kernelde::circuits
