#include "kernelde/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kernelde/circuits.hpp"

namespace kernelde::qsim {

namespace {

constexpr long pow3_table[13] = {1,      3,      9,      27,     81,     243,   729,
                                 2187,   6561,   19683,  59049,  177147, 531441};

using Eigen::Matrix2cd;
using Eigen::Matrix3cd;
using Eigen::Matrix4cd;

const cplx ii(0.0, 1.0);

}  // namespace

long basis_dim(int n_sites)
{
    if (n_sites < 1 || n_sites > max_pure_sites)
        throw std::invalid_argument("basis_dim: site count out of range");
    return pow3_table[n_sites];
}

int site_digit(long index, int site, int n_sites)
{
    return static_cast<int>((index / pow3_table[n_sites - 1 - site]) % 3);
}

// ---------------------------------------------------------------------------
// State

QuditState QuditState::pure_zero(int n_sites)
{
    QuditState s;
    s.n_sites = n_sites;
    s.density = false;
    s.psi = Vec::Zero(basis_dim(n_sites));
    s.psi(0) = 1.0;
    return s;
}

QuditState QuditState::density_zero(int n_sites)
{
    if (n_sites > max_density_sites)
        throw std::invalid_argument("density mode capped at 8 sites");
    QuditState s;
    s.n_sites = n_sites;
    s.density = true;
    s.rho = Mat::Zero(basis_dim(n_sites), basis_dim(n_sites));
    s.rho(0, 0) = 1.0;
    return s;
}

void QuditState::check_valid(double tol, bool check_psd) const
{
    if (!density) {
        double norm2 = psi.squaredNorm();
        if (std::abs(norm2 - 1.0) > tol)
            throw std::runtime_error("pure state norm deviates from 1");
    } else {
        double tr = rho.trace().real();
        if (std::abs(tr - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
            throw std::runtime_error("density trace deviates from 1");
        double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        if (herm > tol)
            throw std::runtime_error("density operator not Hermitian");
        if (check_psd) {
            Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-9)
                throw std::runtime_error("density operator not positive semidefinite");
        }
    }
}

double QuditState::site_population(int site, int level) const
{
    const long R = pow3_table[n_sites - 1 - site];
    const long L = basis_dim(n_sites) / (3 * R);
    double pop = 0.0;
    if (!density) {
        for (long l = 0; l < L; ++l)
            pop += psi.segment(l * 3 * R + level * R, R).squaredNorm();
    } else {
        for (long l = 0; l < L; ++l) {
            const long base = l * 3 * R + level * R;
            for (long r = 0; r < R; ++r)
                pop += rho(base + r, base + r).real();
        }
    }
    return pop;
}

// ---------------------------------------------------------------------------
// Gate metadata and matrices

bool is_rotation_kind(GateKind k)
{
    return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ ||
           k == GateKind::GlobalRX;
}

bool is_global_kind(GateKind k)
{
    return k == GateKind::GlobalRX || k == GateKind::GlobalH || k == GateKind::GlobalZ;
}

bool is_two_site_kind(GateKind k)
{
    return k == GateKind::CZ || k == GateKind::CNOT || k == GateKind::SWAP;
}

const char* kind_name(GateKind k)
{
    switch (k) {
        case GateKind::RX: return "RX";
        case GateKind::RY: return "RY";
        case GateKind::RZ: return "RZ";
        case GateKind::Z: return "Z";
        case GateKind::H: return "H";
        case GateKind::CZ: return "CZ";
        case GateKind::CNOT: return "CNOT";
        case GateKind::SWAP: return "SWAP";
        case GateKind::GlobalRX: return "GRX";
        case GateKind::GlobalH: return "GH";
        case GateKind::GlobalZ: return "GZ";
    }
    return "?";
}

Matrix2cd qubit_unitary_1q(GateKind k, double angle)
{
    Matrix2cd u;
    const double c = std::cos(angle / 2), s = std::sin(angle / 2);
    switch (k) {
        case GateKind::RX:
        case GateKind::GlobalRX:
            u << c, -ii * s, -ii * s, c;
            break;
        case GateKind::RY:
            u << c, -s, s, c;
            break;
        case GateKind::RZ:
            u << std::exp(-ii * (angle / 2)), 0, 0, std::exp(ii * (angle / 2));
            break;
        case GateKind::Z:
        case GateKind::GlobalZ:
            u << 1, 0, 0, -1;
            break;
        case GateKind::H:
        case GateKind::GlobalH:
            u << 1, 1, 1, -1;
            u /= std::sqrt(2.0);
            break;
        default:
            throw std::invalid_argument("qubit_unitary_1q: two-site kind");
    }
    return u;
}

Matrix4cd qubit_unitary_2q(GateKind k)
{
    Matrix4cd u = Matrix4cd::Identity();
    switch (k) {
        case GateKind::CZ:
            u(3, 3) = -1;
            break;
        case GateKind::CNOT:  // targets[0] = control (high bit)
            u(2, 2) = u(3, 3) = 0;
            u(2, 3) = u(3, 2) = 1;
            break;
        case GateKind::SWAP:
            u(1, 1) = u(2, 2) = 0;
            u(1, 2) = u(2, 1) = 1;
            break;
        default:
            throw std::invalid_argument("qubit_unitary_2q: single-site kind");
    }
    return u;
}

Matrix3cd embed_1q(const Matrix2cd& u)
{
    Matrix3cd e = Matrix3cd::Identity();
    e.topLeftCorner<2, 2>() = u;
    return e;
}

Mat embed_2q(const Matrix4cd& u)
{
    Mat e = Mat::Identity(9, 9);
    // qubit pair (d0,d1) lives at 3*d0 + d1
    const int q[4] = {0, 1, 3, 4};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            e(q[r], q[c]) = u(r, c);
    return e;
}

// ---------------------------------------------------------------------------
// Low-level application kernels
//
// Basis index i decomposes as i = l*3R + d*R + r for a given site, where d is
// the site's digit and R its stride. Qubit-subspace gates mix only the d=0 and
// d=1 slabs, so everything below works on contiguous segments/blocks.

namespace {

// qubit mixing of one column-major buffer, several sites in a single sweep
// (a density column, or the pure state vector as one "column")
void qubit_mix_columns(cplx* data, long n_cols, long col_len, int n,
                       const std::vector<int>& sites, const Matrix2cd& u)
{
    const cplx a = u(0, 0), b = u(0, 1), c = u(1, 0), d = u(1, 1);
    Vec seg_tmp(col_len / 3);
    for (long j = 0; j < n_cols; ++j) {
        cplx* p = data + j * col_len;
        for (int site : sites) {
            const long R = pow3_table[n - 1 - site];
            const long L = col_len / (3 * R);
            if (R >= 8) {
                auto t = seg_tmp.head(R);
                for (long l = 0; l < L; ++l) {
                    Eigen::Map<Vec> s0(p + l * 3 * R, R);
                    Eigen::Map<Vec> s1(p + l * 3 * R + R, R);
                    t = a * s0 + b * s1;
                    s1 = c * s0 + d * s1;
                    s0 = t;
                }
            } else {
                for (long l = 0; l < L; ++l) {
                    cplx* base = p + l * 3 * R;
                    for (long r = 0; r < R; ++r) {
                        const cplx x0 = base[r], x1 = base[R + r];
                        base[r] = a * x0 + b * x1;
                        base[R + r] = c * x0 + d * x1;
                    }
                }
            }
        }
    }
}

void apply_1q_pure(Vec& v, int n, int site, const Matrix2cd& u)
{
    qubit_mix_columns(v.data(), 1, v.size(), n, {site}, u);
}

// rho <- rho U^+ for one site: mixes column pairs, each pair L1-resident
void density_col_mix(Mat& m, int n, int site, const Matrix2cd& u)
{
    const long N = m.rows();
    const long R = pow3_table[n - 1 - site];
    const long L = N / (3 * R);
    const cplx a = std::conj(u(0, 0)), b = std::conj(u(0, 1));
    const cplx c = std::conj(u(1, 0)), d = std::conj(u(1, 1));
    Vec tmp(N);
    for (long l = 0; l < L; ++l) {
        for (long r = 0; r < R; ++r) {
            Eigen::Map<Vec> c0(m.col(l * 3 * R + r).data(), N);
            Eigen::Map<Vec> c1(m.col(l * 3 * R + R + r).data(), N);
            tmp = a * c0 + b * c1;
            c1 = c * c0 + d * c1;
            c0 = tmp;
        }
    }
}

void apply_1q_density(Mat& m, int n, int site, const Matrix2cd& u)
{
    qubit_mix_columns(m.data(), m.cols(), m.rows(), n, {site}, u);
    density_col_mix(m, n, site, u);
}

// same unitary on several sites (global pulse): one row sweep, per-site column passes
void apply_uniform_1q_multi(QuditState& state, const std::vector<int>& sites,
                            const Matrix2cd& u)
{
    if (!state.density) {
        qubit_mix_columns(state.psi.data(), 1, state.psi.size(), state.n_sites, sites, u);
    } else {
        qubit_mix_columns(state.rho.data(), state.rho.cols(), state.rho.rows(),
                          state.n_sites, sites, u);
        for (int s : sites) density_col_mix(state.rho, state.n_sites, s, u);
    }
}

// diagonal phase per basis index; phase(i) = prod over involved sites
void apply_diag_pure(Vec& v, const Vec& phase)
{
    v.array() *= phase.array();
}

void apply_diag_density(Mat& m, const Vec& phase)
{
    const long N = m.rows();
    for (long j = 0; j < N; ++j)
        m.col(j) = (m.col(j).array() * phase.array()) * std::conj(phase(j));
}

std::vector<long> qubit_pair_bases(int n, int s0, int s1)
{
    const long N = pow3_table[n];
    std::vector<long> bases;
    bases.reserve(N * 4 / 9 + 1);
    for (long i = 0; i < N; ++i)
        if (site_digit(i, s0, n) == 0 && site_digit(i, s1, n) == 0)
            bases.push_back(i);
    return bases;
}

void apply_2q_pure(Vec& v, int n, int s0, int s1, const Matrix4cd& u,
                   const std::vector<long>& bases)
{
    const long R0 = pow3_table[n - 1 - s0], R1 = pow3_table[n - 1 - s1];
    const long off[4] = {0, R1, R0, R0 + R1};
    cplx x[4], y[4];
    for (long base : bases) {
        for (int k = 0; k < 4; ++k) x[k] = v(base + off[k]);
        for (int r = 0; r < 4; ++r)
            y[r] = u(r, 0) * x[0] + u(r, 1) * x[1] + u(r, 2) * x[2] + u(r, 3) * x[3];
        for (int k = 0; k < 4; ++k) v(base + off[k]) = y[k];
    }
}

void apply_2q_density(Mat& m, int n, int s0, int s1, const Matrix4cd& u,
                      const std::vector<long>& bases)
{
    const long N = pow3_table[n];
    const long R0 = pow3_table[n - 1 - s0], R1 = pow3_table[n - 1 - s1];
    const long off[4] = {0, R1, R0, R0 + R1};
    // rows
    {
        cplx x[4], y[4];
        for (long j = 0; j < N; ++j) {
            cplx* col = m.col(j).data();
            for (long base : bases) {
                for (int k = 0; k < 4; ++k) x[k] = col[base + off[k]];
                for (int r = 0; r < 4; ++r)
                    y[r] = u(r, 0) * x[0] + u(r, 1) * x[1] + u(r, 2) * x[2] +
                           u(r, 3) * x[3];
                for (int k = 0; k < 4; ++k) col[base + off[k]] = y[k];
            }
        }
    }
    // columns, coefficients conjugated
    {
        Mat tmp(N, 4);
        const Matrix4cd uc = u.conjugate();
        for (long base : bases) {
            for (int k = 0; k < 4; ++k) tmp.col(k) = m.col(base + off[k]);
            for (int r = 0; r < 4; ++r)
                m.col(base + off[r]) = uc(r, 0) * tmp.col(0) + uc(r, 1) * tmp.col(1) +
                                       uc(r, 2) * tmp.col(2) + uc(r, 3) * tmp.col(3);
        }
    }
}

// full 3x3 single-site operator (loss channels mix in |L>)
void apply_full_1site_density(Mat& m, int n, int site, const Matrix3cd& k)
{
    const long N = pow3_table[n];
    const long R = pow3_table[n - 1 - site];
    const long L = N / (3 * R);
    {
        Mat t0(R, N), t1(R, N);
        for (long l = 0; l < L; ++l) {
            auto r0 = m.middleRows(l * 3 * R, R);
            auto r1 = m.middleRows(l * 3 * R + R, R);
            auto r2 = m.middleRows(l * 3 * R + 2 * R, R);
            t0 = k(0, 0) * r0 + k(0, 1) * r1 + k(0, 2) * r2;
            t1 = k(1, 0) * r0 + k(1, 1) * r1 + k(1, 2) * r2;
            r2 = k(2, 0) * r0 + k(2, 1) * r1 + k(2, 2) * r2;
            r0 = t0;
            r1 = t1;
        }
    }
    {
        Mat t0(N, R), t1(N, R);
        const Matrix3cd kc = k.conjugate();
        for (long l = 0; l < L; ++l) {
            auto c0 = m.middleCols(l * 3 * R, R);
            auto c1 = m.middleCols(l * 3 * R + R, R);
            auto c2 = m.middleCols(l * 3 * R + 2 * R, R);
            t0 = kc(0, 0) * c0 + kc(0, 1) * c1 + kc(0, 2) * c2;
            t1 = kc(1, 0) * c0 + kc(1, 1) * c1 + kc(1, 2) * c2;
            c2 = kc(2, 0) * c0 + kc(2, 1) * c1 + kc(2, 2) * c2;
            c0 = t0;
            c1 = t1;
        }
    }
}

Vec diag_phase_1q(int n, int site, const cplx& p0, const cplx& p1)
{
    const long N = pow3_table[n];
    const long R = pow3_table[n - 1 - site];
    Vec phase = Vec::Ones(N);
    for (long l = 0; l < N / (3 * R); ++l) {
        phase.segment(l * 3 * R, R).setConstant(p0);
        phase.segment(l * 3 * R + R, R).setConstant(p1);
    }
    return phase;
}

Vec diag_phase_cz(int n, int s0, int s1)
{
    const long N = pow3_table[n];
    Vec phase = Vec::Ones(N);
    for (long i = 0; i < N; ++i)
        if (site_digit(i, s0, n) == 1 && site_digit(i, s1, n) == 1)
            phase(i) = -1.0;
    return phase;
}

void check_targets(const QuditState& state, const Gate& g)
{
    if (g.targets.empty())
        throw std::invalid_argument("gate has no targets");
    if (is_two_site_kind(g.kind) && g.targets.size() != 2)
        throw std::invalid_argument("two-site gate needs exactly two targets");
    if (!is_two_site_kind(g.kind) && !is_global_kind(g.kind) && g.targets.size() != 1)
        throw std::invalid_argument("single-site gate needs exactly one target");
    for (size_t i = 0; i < g.targets.size(); ++i) {
        if (g.targets[i] < 0 || g.targets[i] >= state.n_sites)
            throw std::out_of_range("gate target out of range");
        for (size_t j = i + 1; j < g.targets.size(); ++j)
            if (g.targets[i] == g.targets[j])
                throw std::invalid_argument("repeated target on multi-site gate");
    }
}

}  // namespace

void apply_1q_unitary(QuditState& state, int site, const Matrix2cd& u)
{
    if (state.density)
        apply_1q_density(state.rho, state.n_sites, site, u);
    else
        apply_1q_pure(state.psi, state.n_sites, site, u);
}

void apply_2q_unitary(QuditState& state, int s0, int s1, const Matrix4cd& u)
{
    auto bases = qubit_pair_bases(state.n_sites, s0, s1);
    if (state.density)
        apply_2q_density(state.rho, state.n_sites, s0, s1, u, bases);
    else
        apply_2q_pure(state.psi, state.n_sites, s0, s1, u, bases);
}

void apply_gate_inplace(QuditState& state, const Gate& g)
{
    check_targets(state, g);
    const int n = state.n_sites;
    switch (g.kind) {
        case GateKind::RX:
        case GateKind::RY:
        case GateKind::H:
            apply_1q_unitary(state, g.targets[0], qubit_unitary_1q(g.kind, g.angle));
            break;
        case GateKind::RZ: {
            const cplx p0 = std::exp(-ii * (g.angle / 2)), p1 = std::exp(ii * (g.angle / 2));
            Vec phase = diag_phase_1q(n, g.targets[0], p0, p1);
            if (state.density)
                apply_diag_density(state.rho, phase);
            else
                apply_diag_pure(state.psi, phase);
            break;
        }
        case GateKind::Z:
        case GateKind::GlobalZ: {
            // combined phase vector over all targets, one pass
            Vec phase = Vec::Ones(basis_dim(n));
            for (int t : g.targets)
                phase.array() *= diag_phase_1q(n, t, 1.0, -1.0).array();
            if (state.density)
                apply_diag_density(state.rho, phase);
            else
                apply_diag_pure(state.psi, phase);
            break;
        }
        case GateKind::GlobalRX:
        case GateKind::GlobalH:
            apply_uniform_1q_multi(state, g.targets, qubit_unitary_1q(g.kind, g.angle));
            break;
        case GateKind::CZ: {
            Vec phase = diag_phase_cz(n, g.targets[0], g.targets[1]);
            if (state.density)
                apply_diag_density(state.rho, phase);
            else
                apply_diag_pure(state.psi, phase);
            break;
        }
        case GateKind::CNOT:
        case GateKind::SWAP:
            apply_2q_unitary(state, g.targets[0], g.targets[1], qubit_unitary_2q(g.kind));
            break;
    }
}

QuditState apply_gate(QuditState state, const Gate& g)
{
    apply_gate_inplace(state, g);
    return state;
}

// ---------------------------------------------------------------------------
// Channels

KrausChannel KrausChannel::unitary_mixture(std::vector<int> targets,
                                           std::vector<std::pair<double, Mat>> branches)
{
    KrausChannel ch;
    ch.targets = std::move(targets);
    ch.unravel = Unravel::unitary_mixture;
    const int k = static_cast<int>(ch.targets.size());
    if (k < 1 || k > 2)
        throw std::invalid_argument("unitary_mixture: arity must be 1 or 2");
    const long qd = 1L << k;
    double psum = 0.0;
    for (auto& [p, u] : branches) {
        if (p < -1e-15)
            throw std::invalid_argument("unitary_mixture: negative probability");
        if (u.rows() != qd || u.cols() != qd)
            throw std::invalid_argument("unitary_mixture: branch dimension mismatch");
        if ((u.adjoint() * u - Mat::Identity(qd, qd)).cwiseAbs().maxCoeff() > 1e-10)
            throw std::invalid_argument("unitary_mixture: branch not unitary");
        psum += p;
        ch.probs.push_back(std::max(p, 0.0));
        ch.branch_u.push_back(u);
        Mat emb = (k == 1) ? Mat(embed_1q(u)) : embed_2q(u);
        ch.ops.push_back(std::sqrt(std::max(p, 0.0)) * emb);
    }
    if (std::abs(psum - 1.0) > 1e-9)
        throw std::invalid_argument("unitary_mixture: probabilities do not sum to 1");
    ch.check_cptp();
    return ch;
}

KrausChannel KrausChannel::loss(int site, double p)
{
    if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("loss probability outside [0,1]");
    KrausChannel ch;
    ch.targets = {site};
    ch.unravel = Unravel::loss_jump;
    ch.p_loss = p;
    Matrix3cd k0 = Matrix3cd::Zero(), k1 = Matrix3cd::Zero(), k2 = Matrix3cd::Zero();
    k0(0, 0) = k0(1, 1) = std::sqrt(1.0 - p);
    k0(2, 2) = 1.0;
    k1(2, 0) = std::sqrt(p);
    k2(2, 1) = std::sqrt(p);
    ch.ops = {Mat(k0), Mat(k1), Mat(k2)};
    ch.check_cptp();
    return ch;
}

KrausChannel KrausChannel::general(std::vector<int> targets, std::vector<Mat> ops)
{
    KrausChannel ch;
    ch.targets = std::move(targets);
    ch.ops = std::move(ops);
    ch.unravel = Unravel::general;
    const int k = static_cast<int>(ch.targets.size());
    if (k < 1 || k > 2)
        throw std::invalid_argument("channel arity must be 1 or 2");
    const long d = pow3_table[k];
    for (const Mat& op : ch.ops)
        if (op.rows() != d || op.cols() != d)
            throw std::invalid_argument("Kraus operator dimension mismatch");
    ch.check_cptp();
    return ch;
}

void KrausChannel::check_cptp(double tol) const
{
    const long d = pow3_table[targets.size()];
    Mat sum = Mat::Zero(d, d);
    for (const Mat& op : ops) sum += op.adjoint() * op;
    if ((sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("channel is not trace preserving (sum K^+K != I)");
}

void apply_channel_inplace(QuditState& state, const KrausChannel& ch)
{
    if (!state.density)
        throw std::runtime_error("apply_channel requires density mode (use trajectories for pure states)");
    for (int t : ch.targets)
        if (t < 0 || t >= state.n_sites)
            throw std::out_of_range("channel target out of range");
    const int n = state.n_sites;
    const long N = basis_dim(n);
    Mat out = Mat::Zero(N, N);
    Mat work;
    if (ch.targets.size() == 1) {
        for (const Mat& op : ch.ops) {
            work = state.rho;
            apply_full_1site_density(work, n, ch.targets[0], Matrix3cd(op));
            out += work;
        }
    } else {
        // generic strided two-site application; full 9x9 ops touch all nine digit pairs
        const long R0 = pow3_table[n - 1 - ch.targets[0]];
        const long R1 = pow3_table[n - 1 - ch.targets[1]];
        long offs[9];
        for (int d0 = 0; d0 < 3; ++d0)
            for (int d1 = 0; d1 < 3; ++d1) offs[3 * d0 + d1] = d0 * R0 + d1 * R1;
        std::vector<long> full_bases;
        for (long i = 0; i < N; ++i)
            if (site_digit(i, ch.targets[0], n) == 0 && site_digit(i, ch.targets[1], n) == 0)
                full_bases.push_back(i);
        for (const Mat& op : ch.ops) {
            work = state.rho;
            // rows
            {
                cplx x[9], y[9];
                for (long j = 0; j < N; ++j) {
                    cplx* col = work.col(j).data();
                    for (long base : full_bases) {
                        for (int k = 0; k < 9; ++k) x[k] = col[base + offs[k]];
                        for (int r = 0; r < 9; ++r) {
                            cplx acc = 0;
                            for (int k = 0; k < 9; ++k) acc += op(r, k) * x[k];
                            y[r] = acc;
                        }
                        for (int k = 0; k < 9; ++k) col[base + offs[k]] = y[k];
                    }
                }
            }
            // columns
            {
                Mat tmp(N, 9);
                const Mat opc = op.conjugate();
                for (long base : full_bases) {
                    for (int k = 0; k < 9; ++k) tmp.col(k) = work.col(base + offs[k]);
                    for (int r = 0; r < 9; ++r) {
                        work.col(base + offs[r]) = opc(r, 0) * tmp.col(0);
                        for (int k = 1; k < 9; ++k)
                            work.col(base + offs[r]) += opc(r, k) * tmp.col(k);
                    }
                }
            }
            out += work;
        }
    }
    state.rho.swap(out);
}

QuditState apply_channel(QuditState state, const KrausChannel& ch)
{
    apply_channel_inplace(state, ch);
    return state;
}

void apply_channel_trajectory(QuditState& state, const KrausChannel& ch, rng::Stream& rs)
{
    if (state.density)
        throw std::runtime_error("trajectory application needs a pure state");
    switch (ch.unravel) {
        case KrausChannel::Unravel::unitary_mixture: {
            const double u = rs.uniform();
            double acc = 0.0;
            size_t pick = ch.probs.size() - 1;
            for (size_t i = 0; i < ch.probs.size(); ++i) {
                acc += ch.probs[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            const Mat& bu = ch.branch_u[pick];
            if (bu.isIdentity(0.0))
                return;
            if (ch.targets.size() == 1)
                apply_1q_unitary(state, ch.targets[0], Matrix2cd(bu));
            else
                apply_2q_unitary(state, ch.targets[0], ch.targets[1], Matrix4cd(bu));
            break;
        }
        case KrausChannel::Unravel::loss_jump: {
            const int site = ch.targets[0];
            const double pop0 = state.site_population(site, 0);
            const double pop1 = state.site_population(site, 1);
            const double p = ch.p_loss;
            const double u = rs.uniform();
            const int n = state.n_sites;
            const long R = pow3_table[n - 1 - site];
            const long L = basis_dim(n) / (3 * R);
            auto jump_from = [&](int level, double pop) {
                for (long l = 0; l < L; ++l) {
                    state.psi.segment(l * 3 * R + 2 * R, R) =
                        state.psi.segment(l * 3 * R + level * R, R);
                    state.psi.segment(l * 3 * R, 2 * R).setZero();
                }
                state.psi /= std::sqrt(pop);
            };
            if (u < p * pop0) {
                jump_from(0, pop0);
            } else if (u < p * (pop0 + pop1)) {
                jump_from(1, pop1);
            } else {
                const double keep = 1.0 - p * (pop0 + pop1);
                const double scale = std::sqrt(1.0 - p) / std::sqrt(keep);
                for (long l = 0; l < L; ++l) {
                    state.psi.segment(l * 3 * R, 2 * R) *= scale;
                    state.psi.segment(l * 3 * R + 2 * R, R) /= std::sqrt(keep);
                }
            }
            break;
        }
        case KrausChannel::Unravel::general:
            throw std::runtime_error("non-mixture channel encountered in trajectory mode");
    }
}

// ---------------------------------------------------------------------------
// Readout

Eigen::VectorXd readout_distribution(const QuditState& state, const std::vector<int>& sites)
{
    const int m = static_cast<int>(sites.size());
    const long N = basis_dim(state.n_sites);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(1L << m);
    for (long i = 0; i < N; ++i) {
        const double p = state.density ? state.rho(i, i).real() : std::norm(state.psi(i));
        if (p == 0.0)
            continue;
        long rec = 0;
        for (int k = 0; k < m; ++k) {
            const int d = site_digit(i, sites[k], state.n_sites);
            rec |= static_cast<long>(d >= 1 ? 1 : 0) << (m - 1 - k);
        }
        out(rec) += p;
    }
    return out;
}

Eigen::VectorXd measure_all(const QuditState& state)
{
    std::vector<int> sites(state.n_sites);
    for (int i = 0; i < state.n_sites; ++i) sites[i] = i;
    return readout_distribution(state, sites);
}

// ---------------------------------------------------------------------------
// Circuit execution

void run_circuit(QuditState& state, const circuits::Circuit& c, int begin, int end)
{
    if (state.n_sites != c.n_sites)
        throw std::invalid_argument("state/circuit site count mismatch");
    const int stop = (end < 0) ? static_cast<int>(c.instrs.size()) : end;
    for (int i = begin; i < stop; ++i) {
        const auto& ins = c.instrs[i];
        switch (ins.kind) {
            case circuits::Instruction::Kind::gate:
                apply_gate_inplace(state, ins.gate);
                break;
            case circuits::Instruction::Kind::channel:
                apply_channel_inplace(state, ins.chan);
                break;
            case circuits::Instruction::Kind::move_in:
            case circuits::Instruction::Kind::move_out:
            case circuits::Instruction::Kind::measure:
                break;  // no state action
        }
    }
}

std::string Shot::str() const
{
    std::string s(n_measured, '0');
    for (int k = 0; k < n_measured; ++k)
        if (bit(k)) s[k] = '1';
    return s;
}

Shot run_trajectory(const circuits::Circuit& c, rng::Stream& rs)
{
    QuditState state = QuditState::pure_zero(c.n_sites);
    for (const auto& ins : c.instrs) {
        switch (ins.kind) {
            case circuits::Instruction::Kind::gate:
                apply_gate_inplace(state, ins.gate);
                break;
            case circuits::Instruction::Kind::channel:
                apply_channel_trajectory(state, ins.chan, rs);
                break;
            default:
                break;
        }
    }
    // project the final state onto one basis outcome
    const long N = basis_dim(c.n_sites);
    const double u = rs.uniform();
    double acc = 0.0;
    long idx = N - 1;
    for (long i = 0; i < N; ++i) {
        acc += std::norm(state.psi(i));
        if (u < acc) {
            idx = i;
            break;
        }
    }
    const std::vector<int> sites = c.measured_sites();
    Shot shot;
    shot.n_measured = static_cast<int>(sites.size());
    for (int k = 0; k < shot.n_measured; ++k) {
        const int d = site_digit(idx, sites[k], c.n_sites);
        if (d >= 1) shot.bits |= 1u << (shot.n_measured - 1 - k);
        if (d == 2) shot.lost |= 1u << (shot.n_measured - 1 - k);
    }
    return shot;
}

std::string sample_trajectory(const circuits::Circuit& c, std::uint64_t seed)
{
    rng::Stream rs = rng::shot_stream(seed, 0, 0);
    return run_trajectory(c, rs).str();
}

}  // namespace kernelde::qsim
