#include "kernelde/code422.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace kernelde::code422 {

using circuits::Circuit;
using circuits::Instruction;
using qsim::Gate;
using qsim::GateKind;

CodeSpec code_spec()
{
    CodeSpec s;
    s.s_x = "XXXX";
    s.s_z = "ZZZZ";
    s.z_l1 = "ZZII";
    s.z_l2 = "ZIZI";
    s.x_l1 = "XIXI";
    s.x_l2 = "XXII";
    return s;
}

std::pair<int, int> codeword_patterns(int b1, int b2)
{
    // X_L1 flips b1 on sites {0,2}, X_L2 flips b2 on sites {0,1}; patterns
    // are that operator's support applied to 0000, plus its S_X complement.
    int base = 0;
    if (b1) base ^= 0b1010;
    if (b2) base ^= 0b1100;
    return {base, base ^ 0b1111};
}

Circuit prepare_logical_00()
{
    Circuit c;
    c.n_sites = 5;
    c.start_in_zone.assign(5, true);
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::H, {4}, 0}));
    for (int t = 0; t < 4; ++t)
        c.instrs.push_back(Instruction::make_gate(Gate{GateKind::CNOT, {4, t}, 0}));
    // verification step: noiselessly returns the flag to |0>
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::CNOT, {0, 4}, 0}));
    return c;
}

Circuit proxy_phase(const std::vector<int>& targets, double theta)
{
    std::set<int> t(targets.begin(), targets.end());
    const bool valid = t.size() == 2 && targets.size() == 2 &&
                       *t.begin() >= 0 && *t.rbegin() <= 3;
    if (!valid)
        throw std::invalid_argument(
            "proxy phase targets must be the support of a logical X operator "
            "(a pair of data sites)");
    const int t0 = *t.begin(), t1 = *t.rbegin();

    Circuit c;
    c.n_sites = 6;
    c.start_in_zone.assign(6, true);
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::H, {5}, 0}));
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::CNOT, {5, t0}, 0}));
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::CNOT, {5, t1}, 0}));
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::RX, {5}, theta}));
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::CNOT, {5, t1}, 0}));
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::CNOT, {5, t0}, 0}));
    c.instrs.push_back(Instruction::make_gate(Gate{GateKind::H, {5}, 0}));
    return c;
}

DecodeResult decode(std::uint32_t record, int n_bits)
{
    if (n_bits != 6)
        throw std::invalid_argument("[[4,2,2]] decode expects 6-bit records, got " +
                                    std::to_string(n_bits));
    DecodeResult r;
    const int d0 = (record >> 5) & 1, d1 = (record >> 4) & 1;
    const int d2 = (record >> 3) & 1, d3 = (record >> 2) & 1;
    const int flag = (record >> 1) & 1, anc = record & 1;
    if (flag || anc) {
        r.reject_reason = Reject::flag;
        return r;
    }
    if ((d0 ^ d1 ^ d2 ^ d3) != 0) {
        r.reject_reason = Reject::parity;
        return r;
    }
    r.accepted = true;
    r.b1 = d0 ^ d1;
    r.b2 = d0 ^ d2;
    return r;
}

DecodeResult decode(const qsim::Shot& shot)
{
    if (shot.n_measured != 6)
        throw std::invalid_argument("[[4,2,2]] decode expects 6 measured sites, got " +
                                    std::to_string(shot.n_measured));
    DecodeResult r = decode(shot.bits, 6);
    if (!r.accepted && shot.lost != 0) r.reject_reason = Reject::loss_pattern;
    return r;
}

PostselectionStats postselection_stats(const std::vector<DecodeResult>& results)
{
    if (results.empty())
        throw std::invalid_argument("postselection stats over an empty record list");
    long n_flag = 0, n_parity = 0, n_loss = 0, n_accept = 0;
    for (const DecodeResult& r : results) {
        if (r.accepted) {
            ++n_accept;
        } else if (r.reject_reason == Reject::flag) {
            ++n_flag;
        } else if (r.reject_reason == Reject::parity) {
            ++n_parity;
        } else {
            ++n_loss;
        }
    }
    const double n = static_cast<double>(results.size());
    PostselectionStats s;
    s.flag_reject_rate = n_flag / n;
    s.parity_reject_rate = n_parity / n;
    s.total_discard_rate = (n_flag + n_parity + n_loss) / n;
    s.accepted_count = n_accept;
    return s;
}

}  // namespace kernelde::code422
