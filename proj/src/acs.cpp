#include <lifefin/acs.hpp>

#include <algorithm>

namespace lifefin {

bool common_coin(std::uint64_t seed, std::uint64_t view, NodeId slot, std::uint32_t round) {
    Writer w;
    w.u64(seed);
    w.u64(view);
    w.u32(slot);
    w.u32(round);
    return (sha256(w.bytes())[0] & 1) != 0;
}

const char* AbaMessage::kind() const {
    switch (type) {
        case AbaType::bval: return "aba-bval";
        case AbaType::aux: return "aba-aux";
        case AbaType::finish: return "aba-finish";
    }
    return "?";
}

Aba::Aba(std::uint32_t n, std::uint32_t f, std::uint64_t seed, std::uint64_t view, NodeId slot,
         Broadcast bcast)
    : n_(n), f_(f), seed_(seed), view_(view), slot_(slot), bcast_(std::move(bcast)) {}

void Aba::send_bval(std::uint32_t r, std::uint8_t b) {
    auto& st = rounds_[r];
    if (st.bval_sent[b]) return;
    st.bval_sent[b] = true;
    bcast_(AbaType::bval, r, b);
}

void Aba::input(std::uint8_t b) {
    if (est_ || halted_) return;
    est_ = b & 1;
    send_bval(round_, *est_);
    auto& st = rounds_[round_];
    if (!st.bin_values.empty() && !st.aux_sent) {
        st.aux_sent = true;
        bcast_(AbaType::aux, round_, *st.bin_values.begin());
    }
    try_finish_round();
}

void Aba::decide(std::uint8_t b) {
    if (!decided_) decided_ = b;
    if (!finish_sent_) {
        finish_sent_ = true;
        bcast_(AbaType::finish, 0, b);
    }
}

void Aba::on_message(NodeId from, const AbaMessage& m) {
    if (from >= n_ || m.value > 1) return;
    const std::uint8_t b = m.value;
    if (m.type == AbaType::finish) {
        finish_from_[b].insert(from);
        if (finish_from_[b].size() >= f_ + 1) decide(b);
        if (finish_from_[b].size() >= 2 * f_ + 1) halted_ = true;
        return;
    }
    if (halted_) return;
    auto& st = rounds_[m.round];
    if (m.type == AbaType::bval) {
        st.bval_from[b].insert(from);
        if (st.bval_from[b].size() >= f_ + 1) send_bval(m.round, b);
        if (st.bval_from[b].size() >= 2 * f_ + 1 && !st.bin_values.count(b)) {
            st.bin_values.insert(b);
            if (m.round == round_ && est_ && !st.aux_sent) {
                st.aux_sent = true;
                bcast_(AbaType::aux, m.round, b);
            }
        }
    } else {
        st.aux_from.emplace(from, b);
    }
    try_finish_round();
}

void Aba::try_finish_round() {
    while (est_ && !halted_) {
        auto& st = rounds_[round_];
        if (!st.aux_sent) return;
        std::set<std::uint8_t> vals;
        std::uint32_t count = 0;
        for (const auto& [node, v] : st.aux_from) {
            if (st.bin_values.count(v)) {
                ++count;
                vals.insert(v);
            }
        }
        if (count < 2 * f_ + 1) return;
        const std::uint8_t s = common_coin(seed_, view_, slot_, round_) ? 1 : 0;
        if (vals.size() == 1) {
            const std::uint8_t b = *vals.begin();
            est_ = b;
            if (b == s) decide(b);
        } else {
            est_ = s;
        }
        ++round_;
        send_bval(round_, *est_);
        auto& next = rounds_[round_];
        if (!next.bin_values.empty() && !next.aux_sent) {
            next.aux_sent = true;
            bcast_(AbaType::aux, round_, *next.bin_values.begin());
        }
    }
}

AcsInstance::AcsInstance(std::uint32_t n, std::uint32_t f, NodeId self, std::uint64_t view,
                         std::uint64_t coin_seed, Send send, Validator validate)
    : n_(n),
      f_(f),
      self_(self),
      view_(view),
      send_(std::move(send)),
      validate_(std::move(validate)),
      rbc_(n, f, self, MsgClass::fallback,
           [this](NodeId to, std::shared_ptr<const RbcMessage> m) { send_(to, std::move(m)); }),
      delivered_(n) {
    aba_.reserve(n);
    for (NodeId slot = 0; slot < n; ++slot) {
        aba_.emplace_back(n, f, coin_seed, view, slot,
                          [this, slot](AbaType t, std::uint32_t round, std::uint8_t v) {
                              auto m = std::make_shared<AbaMessage>();
                              m->view = view_;
                              m->slot = slot;
                              m->round = round;
                              m->type = t;
                              m->value = v;
                              for (NodeId to = 0; to < n_; ++to) send_(to, m);
                          });
    }
}

bool AcsInstance::propose(std::shared_ptr<const Bytes> proposal) {
    if (proposed_ || !proposal || !validate_(self_, *proposal)) return false;
    proposed_ = true;
    return rbc_.broadcast(RbcId{view_, self_}, std::move(proposal));
}

void AcsInstance::on_rbc(NodeId from, const RbcMessage& m) {
    if (m.id.round != view_) return;
    for (const auto& ev : rbc_.on_message(from, m))
        if (ev.kind == RbcEvent::Kind::delivered) on_slot_delivered(ev.id.sender, ev.payload);
    check_progress();
}

void AcsInstance::on_slot_delivered(NodeId slot, const std::shared_ptr<const Bytes>& payload) {
    if (slot >= n_ || delivered_[slot]) return;
    if (!validate_(slot, *payload)) return;  // treated as never delivered
    delivered_[slot] = payload;
    if (!aba_[slot].has_input()) aba_[slot].input(1);
}

void AcsInstance::on_aba(NodeId from, const AbaMessage& m) {
    if (m.view != view_ || m.slot >= n_) return;
    aba_[m.slot].on_message(from, m);
    check_progress();
}

void AcsInstance::check_progress() {
    if (output_) return;
    std::uint32_t ones = 0;
    for (const auto& a : aba_)
        if (a.decision() == std::uint8_t{1}) ++ones;
    if (ones >= n_ - f_ && !zeros_filled_) {
        zeros_filled_ = true;
        for (auto& a : aba_)
            if (!a.has_input()) a.input(0);
    }
    AcsOutput out;
    for (NodeId slot = 0; slot < n_; ++slot) {
        auto d = aba_[slot].decision();
        if (!d) return;
        if (*d == 1) {
            if (!delivered_[slot]) return;  // totality brings it eventually
            out.proposals.emplace_back(slot, delivered_[slot]);
        }
    }
    output_ = std::move(out);
}

std::uint32_t AcsInstance::max_aba_rounds() const {
    std::uint32_t m = 0;
    for (const auto& a : aba_) m = std::max(m, a.rounds_used());
    return m;
}

}  // namespace lifefin
