#include <lifefin/rbc.hpp>

namespace lifefin {

const char* to_string(RbcPhase p) {
    switch (p) {
        case RbcPhase::propose: return "propose";
        case RbcPhase::echo: return "echo";
        case RbcPhase::ready: return "ready";
        case RbcPhase::request: return "request";
        case RbcPhase::reply: return "reply";
    }
    return "?";
}

const char* RbcMessage::kind() const {
    if (klass == MsgClass::dag) {
        switch (phase) {
            case RbcPhase::propose: return "rbc-propose";
            case RbcPhase::echo: return "rbc-echo";
            case RbcPhase::ready: return "rbc-ready";
            case RbcPhase::request: return "rbc-request";
            case RbcPhase::reply: return "rbc-reply";
        }
    }
    switch (phase) {
        case RbcPhase::propose: return "acs-propose";
        case RbcPhase::echo: return "acs-echo";
        case RbcPhase::ready: return "acs-ready";
        case RbcPhase::request: return "acs-request";
        case RbcPhase::reply: return "acs-reply";
    }
    return "?";
}

RbcEngine::RbcEngine(std::uint32_t n, std::uint32_t f, NodeId self, MsgClass cls, SendFn send)
    : n_(n), f_(f), self_(self), cls_(cls), send_(std::move(send)) {}

std::shared_ptr<const RbcMessage> RbcEngine::make(MsgClass cls, const RbcId& id, RbcPhase phase,
                                                  const Digest& d,
                                                  std::shared_ptr<const Bytes> payload) {
    auto m = std::make_shared<RbcMessage>();
    m->klass = cls;
    m->id = id;
    m->phase = phase;
    m->digest = d;
    m->payload = std::move(payload);
    return m;
}

void RbcEngine::multicast(const std::shared_ptr<const RbcMessage>& m) {
    for (NodeId to = 0; to < n_; ++to) send_(to, m);
}

bool RbcEngine::broadcast(const RbcId& id, std::shared_ptr<const Bytes> payload) {
    if (id.sender != self_ || !broadcasted_.insert(id).second) return false;
    const Digest d = sha256(*payload);
    multicast(make(cls_, id, RbcPhase::propose, d, std::move(payload)));
    return true;
}

bool RbcEngine::delivered(const RbcId& id) const {
    auto it = inst_.find(id);
    return it != inst_.end() && it->second.delivered;
}

void RbcEngine::forget_before(std::uint64_t round) {
    for (auto it = inst_.begin(); it != inst_.end() && it->first.round < round;) {
        if (it->second.delivered)
            it = inst_.erase(it);
        else
            ++it;
    }
}

std::vector<RbcEvent> RbcEngine::on_message(NodeId from, const RbcMessage& msg) {
    std::vector<RbcEvent> out;
    if (msg.id.sender >= n_ || from >= n_) {
        ++malformed_;
        return out;
    }
    auto& inst = inst_[msg.id];
    const Digest& d = msg.digest;
    switch (msg.phase) {
        case RbcPhase::propose: {
            if (from != msg.id.sender || !msg.payload || sha256(*msg.payload) != d) {
                ++malformed_;
                return out;
            }
            if (inst.first_fired) return out;  // replay or second proposal
            inst.first_fired = true;
            inst.payloads[d] = msg.payload;
            out.push_back({RbcEvent::Kind::first_message, msg.id, msg.payload, d});
            if (!inst.echoed && (!filter_ || filter_(msg.id, d))) {
                inst.echoed = true;
                multicast(make(cls_, msg.id, RbcPhase::echo, d));
            }
            maybe_progress(msg.id, inst, d, out);
            return out;
        }
        case RbcPhase::echo:
            inst.echoes[d].insert(from);
            maybe_progress(msg.id, inst, d, out);
            return out;
        case RbcPhase::ready:
            inst.readies[d].insert(from);
            maybe_progress(msg.id, inst, d, out);
            return out;
        case RbcPhase::request: {
            auto it = inst.payloads.find(d);
            if (it != inst.payloads.end())
                send_(from, make(cls_, msg.id, RbcPhase::reply, d, it->second));
            return out;
        }
        case RbcPhase::reply: {
            if (!msg.payload || sha256(*msg.payload) != d) {
                ++malformed_;
                return out;
            }
            if (!inst.payloads.count(d)) inst.payloads[d] = msg.payload;
            maybe_progress(msg.id, inst, d, out);
            return out;
        }
    }
    return out;
}

void RbcEngine::maybe_progress(const RbcId& id, Instance& inst, const Digest& d,
                               std::vector<RbcEvent>& out) {
    const std::uint32_t q = 2 * f_ + 1;
    const bool may_vote = !filter_ || filter_(id, d);
    if (!inst.readied && may_vote &&
        (inst.echoes[d].size() >= q || inst.readies[d].size() >= f_ + 1)) {
        inst.readied = true;
        multicast(make(cls_, id, RbcPhase::ready, d));
    }
    if (inst.delivered || inst.readies[d].size() < q) return;
    auto it = inst.payloads.find(d);
    if (it == inst.payloads.end()) {
        // Ask every holder once; echoers that arrive later are asked as they appear.
        std::set<NodeId> holders = inst.echoes[d];
        holders.insert(inst.readies[d].begin(), inst.readies[d].end());
        for (NodeId p : holders)
            if (p != self_ && inst.asked.insert(p).second)
                send_(p, make(cls_, id, RbcPhase::request, d));
        return;
    }
    inst.delivered = true;
    if (!inst.first_fired) {
        inst.first_fired = true;
        out.push_back({RbcEvent::Kind::first_message, id, it->second, d});
    }
    out.push_back({RbcEvent::Kind::delivered, id, it->second, d});
}

}  // namespace lifefin
