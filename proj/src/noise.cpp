#include "kernelde/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace kernelde::noise {

using qsim::cplx;
using qsim::Gate;
using qsim::GateKind;
using qsim::KrausChannel;
using qsim::Mat;
using circuits::Circuit;
using circuits::Instruction;

namespace {

const char pauli_chars[] = "IXYZ";

Eigen::Matrix2cd pauli_1q(char p)
{
    const cplx i(0.0, 1.0);
    Eigen::Matrix2cd m;
    switch (p) {
        case 'I': m << 1, 0, 0, 1; break;
        case 'X': m << 0, 1, 1, 0; break;
        case 'Y': m << 0, -i, i, 0; break;
        case 'Z': m << 1, 0, 0, -1; break;
        default: throw std::invalid_argument(std::string("bad Pauli letter: ") + p);
    }
    return m;
}

Mat kron(const Mat& a, const Mat& b)
{
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

std::string identity_label(int arity) { return std::string(arity, 'I'); }

void check_label(const std::string& label, int arity)
{
    if (static_cast<int>(label.size()) != arity)
        throw std::invalid_argument("Pauli label '" + label + "' does not match arity " +
                                    std::to_string(arity));
    for (char ch : label)
        if (std::string(pauli_chars).find(ch) == std::string::npos)
            throw std::invalid_argument("Pauli label '" + label + "' has letters outside IXYZ");
}

// basis indices of the qubit subspace inside the 3^k site space
std::vector<long> qubit_indices(int arity)
{
    if (arity == 1) return {0, 1};
    return {0, 1, 3, 4};
}

// expansion coefficients a_m = tr(P_m K_sub) / 2^k of one Kraus operator
Eigen::VectorXcd pauli_coefficients(const Mat& k_full, int arity)
{
    const auto qidx = qubit_indices(arity);
    const long d2 = 1L << arity;
    Mat k_sub(d2, d2);
    for (long i = 0; i < d2; ++i)
        for (long j = 0; j < d2; ++j)
            k_sub(i, j) = k_full(qidx[i], qidx[j]);
    const long np = d2 * d2;
    Eigen::VectorXcd a(np);
    for (long m = 0; m < np; ++m) {
        const Mat p = pauli_qubit_matrix(pauli_label(arity, static_cast<int>(m)));
        a(m) = (p * k_sub).trace() / static_cast<double>(d2);
    }
    return a;
}

Eigen::Matrix2cd rz_qubit(double theta)
{
    const cplx i(0.0, 1.0);
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    m(0, 0) = std::exp(-i * (theta / 2));
    m(1, 1) = std::exp(i * (theta / 2));
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// PauliChannel / ChiMatrix

PauliChannel PauliChannel::from_error_probs(int arity,
                                            const std::map<std::string, double>& non_identity)
{
    if (arity != 1 && arity != 2)
        throw std::invalid_argument("Pauli channel arity must be 1 or 2");
    PauliChannel pc;
    pc.arity = arity;
    double sum = 0.0;
    for (const auto& [label, p] : non_identity) {
        check_label(label, arity);
        if (label == identity_label(arity))
            throw std::invalid_argument("identity entry is implied, list only error terms");
        pc.probs[label] = p;
        sum += p;
    }
    pc.probs[identity_label(arity)] = 1.0 - sum;
    pc.validate();
    return pc;
}

double PauliChannel::p_identity() const
{
    auto it = probs.find(identity_label(arity));
    return it == probs.end() ? 0.0 : it->second;
}

double PauliChannel::error_sum() const { return 1.0 - p_identity(); }

void PauliChannel::validate(double tol) const
{
    double sum = 0.0;
    for (const auto& [label, p] : probs) {
        check_label(label, arity);
        if (p < -tol)
            throw std::runtime_error("negative Pauli probability at " + label);
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
        throw std::runtime_error("Pauli probabilities sum to " + std::to_string(sum));
}

std::string pauli_label(int arity, int index)
{
    if (arity == 1) return std::string(1, pauli_chars[index]);
    return {pauli_chars[index / 4], pauli_chars[index % 4]};
}

Mat pauli_qubit_matrix(const std::string& label)
{
    Mat m = pauli_1q(label[0]);
    for (size_t i = 1; i < label.size(); ++i) m = kron(m, pauli_1q(label[i]));
    return m;
}

KrausChannel pauli_to_channel(const PauliChannel& pc, std::vector<int> targets)
{
    pc.validate(1e-9);
    if (static_cast<int>(targets.size()) != pc.arity)
        throw std::invalid_argument("target count does not match Pauli channel arity");
    std::vector<std::pair<double, Mat>> branches;
    branches.reserve(pc.probs.size());
    for (const auto& [label, p] : pc.probs)
        branches.emplace_back(p, pauli_qubit_matrix(label));
    return KrausChannel::unitary_mixture(std::move(targets), std::move(branches));
}

ChiMatrix channel_to_chi(const qsim::KrausChannel& ch)
{
    const int arity = static_cast<int>(ch.targets.size());
    if (arity < 1 || arity > 2)
        throw std::invalid_argument("chi matrix supports arity 1 and 2 only");
    const long np = (1L << arity) * (1L << arity);
    ChiMatrix chi;
    chi.arity = arity;
    chi.entries = Mat::Zero(np, np);
    for (const Mat& k : ch.ops) {
        const Eigen::VectorXcd a = pauli_coefficients(k, arity);
        chi.entries += a * a.adjoint();
    }
    return chi;
}

PauliChannel pauli_twirl(const qsim::KrausChannel& ch, const qsim::Gate& ideal)
{
    const int arity = static_cast<int>(ch.targets.size());
    if (arity < 1 || arity > 2)
        throw std::invalid_argument("twirl supports arity 1 and 2 only");
    if (static_cast<int>(ideal.targets.size()) != arity)
        throw std::invalid_argument("ideal gate arity does not match channel");

    // (K U^+)_sub = K_sub U_sub^+ because embedded gates never couple |L>
    Mat u_sub;
    if (arity == 1)
        u_sub = qsim::qubit_unitary_1q(ideal.kind, ideal.angle);
    else
        u_sub = qsim::qubit_unitary_2q(ideal.kind);

    const auto qidx = qubit_indices(arity);
    const long d2 = 1L << arity;
    const long np = d2 * d2;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(np);
    for (const Mat& k : ch.ops) {
        Mat k_sub(d2, d2);
        for (long i = 0; i < d2; ++i)
            for (long j = 0; j < d2; ++j)
                k_sub(i, j) = k(qidx[i], qidx[j]);
        const Mat e_sub = k_sub * u_sub.adjoint();
        for (long m = 0; m < np; ++m) {
            const Mat p = pauli_qubit_matrix(pauli_label(arity, static_cast<int>(m)));
            const cplx a = (p * e_sub).trace() / static_cast<double>(d2);
            diag(m) += std::norm(a);
        }
    }
    double total = 0.0;
    for (long m = 0; m < np; ++m) {
        if (diag(m) < -1e-9)
            throw std::runtime_error("twirl produced a negative probability: " +
                                     std::to_string(diag(m)));
        diag(m) = std::max(diag(m), 0.0);
        total += diag(m);
    }
    if (total < 1e-12)
        throw std::runtime_error("channel has no qubit-subspace support to twirl");
    PauliChannel pc;
    pc.arity = arity;
    for (long m = 0; m < np; ++m)
        pc.probs[pauli_label(arity, static_cast<int>(m))] = diag(m) / total;
    return pc;
}

// ---------------------------------------------------------------------------
// NoiseModel

bool ClassParams::trivial() const
{
    return pauli.error_sum() <= 0.0 && loss <= 0.0 && coherent_bias_rad == 0.0;
}

void NoiseModel::validate() const
{
    auto check = [](const ClassParams& cp, int arity, const char* name) {
        if (cp.pauli.arity != arity)
            throw std::runtime_error(std::string("class ") + name + " must have arity " +
                                     std::to_string(arity));
        cp.pauli.validate(1e-9);
        if (cp.loss < 0.0 || cp.loss > 1.0)
            throw std::runtime_error(std::string("class ") + name + " loss outside [0,1]");
    };
    check(single_qubit_global, 1, "single_qubit_global");
    check(single_qubit_local_z, 1, "single_qubit_local_Z");
    check(cz, 2, "CZ");
    check(move, 1, "move");
    check(idle, 1, "idle");
    check(state_prep, 1, "state_prep");
    check(readout, 1, "readout");
}

namespace {

nlohmann::ordered_json class_to_json(const ClassParams& cp)
{
    nlohmann::ordered_json pauli = nlohmann::ordered_json::object();
    for (const auto& [label, p] : cp.pauli.probs)
        if (label != identity_label(cp.pauli.arity)) pauli[label] = p;
    nlohmann::ordered_json j;
    j["pauli"] = pauli;
    j["loss"] = cp.loss;
    j["coherent_bias_rad"] = cp.coherent_bias_rad;
    return j;
}

ClassParams class_from_json(const nlohmann::json& j, int arity, const char* name)
{
    ClassParams cp;
    std::map<std::string, double> err;
    if (j.contains("pauli")) {
        for (const auto& [label, p] : j.at("pauli").items())
            err[label] = p.get<double>();
    }
    try {
        cp.pauli = PauliChannel::from_error_probs(arity, err);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("class ") + name + ": " + e.what());
    }
    cp.loss = j.value("loss", 0.0);
    cp.coherent_bias_rad = j.value("coherent_bias_rad", 0.0);
    return cp;
}

}  // namespace

std::string NoiseModel::to_json() const
{
    validate();
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["seed"] = seed;
    j["cz_residual_phase_rad"] = cz_residual_phase_rad;
    j["single_qubit_global"] = class_to_json(single_qubit_global);
    j["single_qubit_local_Z"] = class_to_json(single_qubit_local_z);
    j["CZ"] = class_to_json(cz);
    j["move"] = class_to_json(move);
    j["idle"] = class_to_json(idle);
    j["state_prep"] = class_to_json(state_prep);
    j["readout"] = class_to_json(readout);
    return j.dump(2) + "\n";
}

NoiseModel NoiseModel::from_json(const std::string& text)
{
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("schema") || j.at("schema").get<int>() != 1)
        throw std::runtime_error("noise config: unsupported or missing schema (want 1)");
    NoiseModel m = zero_noise_model();
    m.seed = j.value("seed", std::uint64_t{1});
    m.cz_residual_phase_rad = j.value("cz_residual_phase_rad", 0.0);
    auto load = [&](ClassParams& cp, int arity, const char* name) {
        if (j.contains(name)) cp = class_from_json(j.at(name), arity, name);
    };
    load(m.single_qubit_global, 1, "single_qubit_global");
    load(m.single_qubit_local_z, 1, "single_qubit_local_Z");
    load(m.cz, 2, "CZ");
    load(m.move, 1, "move");
    load(m.idle, 1, "idle");
    load(m.state_prep, 1, "state_prep");
    load(m.readout, 1, "readout");
    m.validate();
    return m;
}

NoiseModel default_noise_model()
{
    NoiseModel m = zero_noise_model();

    // Split assumptions: gate infidelity -> 70% depolarizing + 30% coherent
    // (single-qubit pulses); CZ -> 40% two-qubit depolarizing + 30% loss
    // (split over the two atoms) + residual-phase knob; local Z -> 70%
    // dephasing + 30% loss.
    const double eps_1q = 1.0 - 0.9996;
    const double eps_cz = 1.0 - 0.987;
    const double eps_lz = 1.0 - 0.992;

    const double p1 = 0.7 * eps_1q / 3.0;
    m.single_qubit_global.pauli =
        PauliChannel::from_error_probs(1, {{"X", p1}, {"Y", p1}, {"Z", p1}});
    m.single_qubit_global.coherent_bias_rad = 2.0 * std::asin(std::sqrt(0.3 * eps_1q));

    m.single_qubit_local_z.pauli =
        PauliChannel::from_error_probs(1, {{"Z", 0.7 * eps_lz}});
    m.single_qubit_local_z.loss = 0.3 * eps_lz;

    std::map<std::string, double> cz_probs;
    const double p2 = 0.4 * eps_cz / 15.0;
    for (int idx = 0; idx < 16; ++idx) {
        const std::string label = pauli_label(2, idx);
        if (label != "II") cz_probs[label] = p2;
    }
    m.cz.pauli = PauliChannel::from_error_probs(2, cz_probs);
    m.cz.loss = 0.3 * eps_cz / 2.0;
    m.cz_residual_phase_rad = 0.05;

    // one spin echo per 2 ms move against T2 = 1.49 s
    const double pz_move = (1.0 - std::exp(-2.0 * 0.002 / 1.49)) / 2.0;
    m.move.pauli = PauliChannel::from_error_probs(1, {{"Z", pz_move}});
    m.idle.pauli = PauliChannel::from_error_probs(1, {{"Z", pz_move}});

    m.state_prep.pauli = PauliChannel::from_error_probs(1, {{"X", 1.0 - 0.994}});
    m.readout.loss = 1.0 - 0.997;

    m.validate();
    return m;
}

NoiseModel zero_noise_model()
{
    NoiseModel m;
    m.single_qubit_global.pauli = PauliChannel::from_error_probs(1, {});
    m.single_qubit_local_z.pauli = PauliChannel::from_error_probs(1, {});
    m.cz.pauli = PauliChannel::from_error_probs(2, {});
    m.move.pauli = PauliChannel::from_error_probs(1, {});
    m.idle.pauli = PauliChannel::from_error_probs(1, {});
    m.state_prep.pauli = PauliChannel::from_error_probs(1, {});
    m.readout.pauli = PauliChannel::from_error_probs(1, {});
    return m;
}

// ---------------------------------------------------------------------------
// Injection

circuits::Circuit inject_error(const circuits::Circuit& c, int location, const qsim::Gate& err)
{
    if (location < 0 || location > static_cast<int>(c.instrs.size()))
        throw std::out_of_range("injection index " + std::to_string(location) +
                                " outside circuit of " + std::to_string(c.instrs.size()) +
                                " instructions");
    Circuit out = c;
    out.instrs.insert(out.instrs.begin() + location, Instruction::make_gate(err));
    for (auto& [name, idx] : out.anchors)
        if (idx > location) ++idx;
    return out;
}

circuits::Circuit inject_zone_rotation(const circuits::Circuit& c, const std::string& anchor,
                                       qsim::GateKind kind, double angle_rad)
{
    if (!qsim::is_rotation_kind(kind) || qsim::is_global_kind(kind))
        throw std::invalid_argument("injection wants a local rotation kind");
    auto it = c.anchors.find(anchor);
    if (it == c.anchors.end())
        throw std::runtime_error("unknown anchor: " + anchor);
    const int at = it->second;
    const auto mask = c.zone_mask_at(at);
    Circuit out = c;
    int offset = 0;
    for (int s = 0; s < c.n_sites; ++s) {
        if (!mask[s]) continue;
        out = inject_error(out, at + offset, Gate{kind, {s}, angle_rad});
        ++offset;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decoration

namespace {

enum class GateClass { global_1q, local_z, two_site, none };

GateClass classify(GateKind k)
{
    switch (k) {
        case GateKind::RX:
        case GateKind::RY:
        case GateKind::H:
        case GateKind::GlobalRX:
        case GateKind::GlobalH:
        case GateKind::GlobalZ:
            return GateClass::global_1q;
        case GateKind::Z:
        case GateKind::RZ:
            return GateClass::local_z;
        case GateKind::CZ:
        case GateKind::CNOT:
        case GateKind::SWAP:
            return GateClass::two_site;
    }
    return GateClass::none;
}

void emit_single_site_noise(Circuit& out, const ClassParams& cp, int site)
{
    if (cp.pauli.error_sum() > 0.0)
        out.instrs.push_back(Instruction::make_channel(pauli_to_channel(cp.pauli, {site})));
    if (cp.loss > 0.0)
        out.instrs.push_back(Instruction::make_channel(KrausChannel::loss(site, cp.loss)));
}

}  // namespace

circuits::Circuit apply_noise_model(const circuits::Circuit& c, const NoiseModel& m)
{
    m.validate();
    Circuit out;
    out.n_sites = c.n_sites;
    out.start_in_zone = c.start_in_zone;

    std::vector<int> new_index(c.instrs.size() + 1, 0);

    if (!m.state_prep.trivial())
        for (int s = 0; s < c.n_sites; ++s) emit_single_site_noise(out, m.state_prep, s);

    for (size_t i = 0; i < c.instrs.size(); ++i) {
        new_index[i] = static_cast<int>(out.instrs.size());
        const Instruction& instr = c.instrs[i];
        switch (instr.kind) {
            case Instruction::Kind::channel:
                out.instrs.push_back(instr);
                break;
            case Instruction::Kind::move_in:
            case Instruction::Kind::move_out: {
                out.instrs.push_back(instr);
                if (!m.move.trivial()) emit_single_site_noise(out, m.move, instr.site);
                if (!m.idle.trivial())
                    for (int s = 0; s < c.n_sites; ++s)
                        if (s != instr.site) emit_single_site_noise(out, m.idle, s);
                break;
            }
            case Instruction::Kind::measure: {
                if (!m.readout.trivial())
                    for (int s : instr.sites) emit_single_site_noise(out, m.readout, s);
                out.instrs.push_back(instr);
                break;
            }
            case Instruction::Kind::gate: {
                Gate g = instr.gate;
                const GateClass gc = classify(g.kind);
                if (gc == GateClass::global_1q || gc == GateClass::local_z) {
                    const ClassParams& cp = gc == GateClass::global_1q
                                                ? m.single_qubit_global
                                                : m.single_qubit_local_z;
                    // Angle-parameterized pulses carry the systematic
                    // over-rotation; fixed pulses (H, Z) are part of the
                    // calibrated set and stay bias-free.
                    const double bias = cp.coherent_bias_rad;
                    if (bias != 0.0 && qsim::is_rotation_kind(g.kind))
                        g.angle += g.angle < 0.0 ? -bias : bias;
                    out.instrs.push_back(Instruction::make_gate(g));
                    if (cp.pauli.error_sum() > 0.0 || cp.loss > 0.0)
                        for (int t : g.targets) emit_single_site_noise(out, cp, t);
                } else {
                    out.instrs.push_back(Instruction::make_gate(g));
                    const double phi = m.cz_residual_phase_rad;
                    const bool has_pauli = m.cz.pauli.error_sum() > 0.0;
                    if (has_pauli || phi != 0.0) {
                        const Mat residual =
                            phi != 0.0 ? kron(Mat(rz_qubit(phi)), Mat(rz_qubit(phi)))
                                       : Mat(Mat::Identity(4, 4));
                        std::vector<std::pair<double, Mat>> branches;
                        for (const auto& [label, p] : m.cz.pauli.probs)
                            branches.emplace_back(p, Mat(pauli_qubit_matrix(label) * residual));
                        out.instrs.push_back(Instruction::make_channel(
                            KrausChannel::unitary_mixture(g.targets, std::move(branches))));
                    }
                    if (m.cz.loss > 0.0)
                        for (int t : g.targets)
                            out.instrs.push_back(
                                Instruction::make_channel(KrausChannel::loss(t, m.cz.loss)));
                }
                break;
            }
        }
    }
    new_index[c.instrs.size()] = static_cast<int>(out.instrs.size());

    for (const auto& [name, idx] : c.anchors) out.anchors[name] = new_index[idx];
    out.validate();
    return out;
}

}  // namespace kernelde::noise
