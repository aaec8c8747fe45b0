#include <lifefin/mysticeti.hpp>

#include <algorithm>
#include <unordered_set>

namespace lifefin {

namespace {

std::vector<VertexPtr> slot_candidates(const DagStore& store, Round r, NodeId leader) {
    std::vector<VertexPtr> out;
    for (const auto& v : store.all_at_round(r))
        if (v->creator() == leader) out.push_back(v);
    return out;
}

// Distinct creators among round r+1 vertices referencing `candidate`, restricted
// to `allowed` when given.
std::set<NodeId> supporters(const DagStore& store, const Vertex& candidate,
                            const std::unordered_set<Digest, DigestHash>* allowed) {
    std::set<NodeId> out;
    for (const auto& v : store.all_at_round(candidate.round() + 1)) {
        if (allowed && !allowed->count(v->digest())) continue;
        if (v->references(candidate.digest())) out.insert(v->creator());
    }
    return out;
}

// Stored ancestors of `from` (inclusive) sitting exactly at round `target`.
std::unordered_set<Digest, DigestHash> ancestors_at(const DagStore& store, const Vertex& from,
                                                    Round target) {
    std::unordered_set<Digest, DigestHash> hits, seen{from.digest()};
    if (from.round() == target) {
        hits.insert(from.digest());
        return hits;
    }
    std::vector<const Vertex*> stack{&from};
    while (!stack.empty()) {
        const Vertex* cur = stack.back();
        stack.pop_back();
        for (const auto& ref : cur->refs()) {
            if (ref.round < target || !seen.insert(ref.digest).second) continue;
            if (ref.round == target) {
                if (store.contains(ref.digest)) hits.insert(ref.digest);
                continue;
            }
            auto next = store.find(ref.digest);
            if (!next) continue;
            stack.push_back(next.get());
        }
    }
    return hits;
}

}  // namespace

const char* to_string(Pattern p) {
    switch (p) {
        case Pattern::skip: return "skip";
        case Pattern::certified: return "certified";
        case Pattern::neither: return "neither";
    }
    return "?";
}

const char* to_string(SlotStatus::Kind k) {
    switch (k) {
        case SlotStatus::Kind::to_commit: return "to-commit";
        case SlotStatus::Kind::to_skip: return "to-skip";
        case SlotStatus::Kind::undecided: return "undecided";
    }
    return "?";
}

Pattern classify_pattern(const DagStore& store, const VertexRef& v) {
    std::set<NodeId> refs_it, not_it;
    for (const auto& w : store.all_at_round(v.round + 1)) {
        if (w->references(v.digest))
            refs_it.insert(w->creator());
        else
            not_it.insert(w->creator());
    }
    if (refs_it.size() >= store.quorum()) return Pattern::certified;
    if (not_it.size() >= store.quorum()) return Pattern::skip;
    return Pattern::neither;
}

SlotStatus direct_decide(const DagStore& store, Round r, NodeId leader) {
    SlotStatus st;
    st.round = r;
    const auto candidates = slot_candidates(store, r, leader);
    const auto deciders = store.all_at_round(r + 2);
    for (const auto& c : candidates) {
        std::unordered_set<Digest, DigestHash> support;
        for (const auto& v : store.all_at_round(r + 1))
            if (v->references(c->digest())) support.insert(v->digest());
        std::set<NodeId> certifiers;
        for (const auto& d : deciders) {
            std::set<NodeId> seen;
            for (const auto& ref : d->refs())
                if (ref.round == r + 1 && support.count(ref.digest)) seen.insert(ref.creator);
            if (seen.size() >= store.quorum()) certifiers.insert(d->creator());
        }
        if (certifiers.size() >= store.quorum()) {
            st.kind = SlotStatus::Kind::to_commit;
            st.leader = c;
            st.direct = true;
            return st;
        }
    }
    std::set<NodeId> skippers;
    for (const auto& v : store.all_at_round(r + 1))
        if (!v->references_slot(r, leader)) skippers.insert(v->creator());
    if (skippers.size() >= store.quorum()) {
        st.kind = SlotStatus::Kind::to_skip;
        st.direct = true;
    }
    return st;
}

bool certified_in_history(const DagStore& store, const Vertex& anchor, const Vertex& candidate) {
    if (anchor.round() <= candidate.round() + 1) return false;
    const auto reach = ancestors_at(store, anchor, candidate.round() + 1);
    return supporters(store, candidate, &reach).size() >= store.quorum();
}

static SlotStatus indirect_from_anchor(const DagStore& store, Round r, NodeId leader,
                                       const SlotStatus* anchor) {
    SlotStatus st;
    st.round = r;
    if (!anchor || anchor->kind != SlotStatus::Kind::to_commit) return st;
    for (const auto& c : slot_candidates(store, r, leader)) {
        if (certified_in_history(store, *anchor->leader, *c)) {
            st.kind = SlotStatus::Kind::to_commit;
            st.leader = c;
            return st;
        }
    }
    st.kind = SlotStatus::Kind::to_skip;
    return st;
}

SlotStatus indirect_decide(const DagStore& store, Round r, NodeId leader,
                           const std::vector<SlotStatus>& later) {
    for (const auto& s : later) {
        if (s.round <= r + 2 || s.kind == SlotStatus::Kind::to_skip) continue;
        return indirect_from_anchor(store, r, leader, &s);
    }
    return indirect_from_anchor(store, r, leader, nullptr);
}

SlotStatus DecisionCache::direct(const DagStore& store, Round r, NodeId leader) {
    const auto seen1 = store.count_round(r + 1) + static_cast<std::uint32_t>(store.evidence().size());
    const auto seen2 = store.count_round(r + 2) + static_cast<std::uint32_t>(store.evidence().size());
    auto it = entries_.find(r);
    if (it != entries_.end() && it->second.leader == leader) {
        if (it->second.status.decided()) return it->second.status;
        if (it->second.seen_r1 == seen1 && it->second.seen_r2 == seen2) return it->second.status;
    }
    auto st = direct_decide(store, r, leader);
    entries_[r] = Entry{st, seen1, seen2, leader};
    return st;
}

std::vector<SlotStatus> decide_rounds(const DagStore& store, Round lo, Round hi,
                                      const LeaderFn& leader_of,
                                      const std::map<Round, VertexPtr>& fixed,
                                      DecisionCache* cache) {
    std::vector<SlotStatus> desc;
    if (hi < lo) return desc;
    // Lowest non-skip status at round >= r+3, maintained while scanning down.
    std::optional<std::size_t> anchor;
    for (Round r = hi; r >= lo && r > 0; --r) {
        if (r + 3 <= hi) {
            const auto& s = desc[hi - (r + 3)];
            if (s.kind != SlotStatus::Kind::to_skip) anchor = hi - (r + 3);
        }
        SlotStatus st;
        auto fit = fixed.find(r);
        if (fit != fixed.end() && fit->second) {
            st.round = r;
            st.kind = SlotStatus::Kind::to_commit;
            st.leader = fit->second;
            st.direct = true;
        } else {
            const NodeId leader = leader_of(r);
            st = cache ? cache->direct(store, r, leader) : direct_decide(store, r, leader);
            if (!st.decided())
                st = indirect_from_anchor(store, r, leader, anchor ? &desc[*anchor] : nullptr);
        }
        desc.push_back(std::move(st));
        if (r == lo) break;
    }
    std::reverse(desc.begin(), desc.end());
    return desc;
}

// ---------------------------------------------------------------------------

MysticetiNode::MysticetiNode(NodeId self, const NodeConfig& cfg, SimNet& net, const KeyRing& keys,
                             Strategy& strategy, MetricsLog& log)
    : Node(self, cfg, DagMode::uncertified, net, keys, strategy, log) {}

SimTime MysticetiNode::leader_timeout() const {
    return cfg_.leader_timeout > 0 ? cfg_.leader_timeout : 1000;
}

void MysticetiNode::start() {
    Node::start();
    set_timer(timer_leader, now() + leader_timeout(), current_round_);
    try_advance();
}

void MysticetiNode::handle_dag(NodeId from, const MessagePtr& m) {
    auto* vm = dynamic_cast<const VertexMessage*>(m.get());
    if (!vm || !vm->vertex || vm->vertex->creator() != from) return;
    ingest(vm->vertex, MsgClass::dag, true);
}

void MysticetiNode::handle_timer(std::uint8_t kind, std::uint64_t value) {
    if (kind != timer_leader) return;
    timed_out_.insert(value);
    if (mode_ == Mode::optimistic) try_advance();
}

void MysticetiNode::on_inserted(const VertexPtr&) {
    try_decide();
    try_advance();
}

void MysticetiNode::try_decide() {
    if (deciding_ || mode_ != Mode::optimistic) return;
    deciding_ = true;
    const Round lo = finalized_.empty() ? 1 : finalized_.back().round + 1;
    const Round hi = std::max(current_round_, store_.max_round());
    auto statuses = decide_rounds(store_, lo, hi, [this](Round r) { return leader_of(r); }, fixed_,
                                  &cache_);
    for (const auto& st : statuses) {
        if (!st.decided()) break;
        if (st.kind == SlotStatus::Kind::to_commit) {
            auto hist = store_.causal_history(st.leader->ref());
            if (auto* miss = std::get_if<MissingHistory>(&hist)) {
                std::vector<Digest> want;
                for (const auto& ref : miss->refs) want.push_back(ref.digest);
                request_sync(want, MsgClass::dag);
                break;
            }
            const bool by_fallback = fixed_.count(st.round) != 0;
            order_leader(st.leader, by_fallback ? CommitKind::fallback
                                    : st.direct  ? CommitKind::direct
                                                 : CommitKind::indirect);
            committed_round_ = std::max(committed_round_, st.round);
        }
        finalized_.push_back(st);
    }
    deciding_ = false;
}

void MysticetiNode::try_advance() {
    while (can_create()) {
        const Round r = current_round_;
        if (store_.count_round(r) < store_.quorum()) return;
        auto lv = leader_vertex(r);
        if (!lv && !timed_out_.count(r)) return;

        const Round next = r + 1;
        const bool exclude = strategy_.exclude_leader_refs(self_, now());
        std::vector<VertexRef> refs;
        for (const auto& v : store_.by_round(r)) {
            if (exclude && lv && v->digest() == lv->digest()) continue;
            refs.push_back(v->ref());
        }
        if (refs.size() < store_.quorum()) return;
        if (leader_of(next) == self_ && strategy_.skip_leader_vertex(self_, now())) {
            current_round_ = next;
            set_timer(timer_leader, now() + leader_timeout(), next);
            continue;
        }
        create_vertex(next, std::move(refs));
    }
}

void MysticetiNode::create_vertex(Round r, std::vector<VertexRef> refs) {
    auto v = Vertex::make(r, self_, next_payload(), refs);
    note_created(v, leader_of(r) == self_, true);
    current_round_ = r;
    set_timer(timer_leader, now() + leader_timeout(), r);
    if (strategy_.equivocates(self_, now())) {
        Bytes alt_payload = v->payload();
        alt_payload.push_back(0xee);
        auto alt = Vertex::make(r, self_, std::move(alt_payload), refs);
        for (NodeId to = 0; to < cfg_.n; ++to) {
            auto msg = std::make_shared<VertexMessage>();
            msg->vertex = to < cfg_.n / 2 ? v : alt;
            net_.send(self_, to, msg);
        }
        return;
    }
    auto msg = std::make_shared<VertexMessage>();
    msg->vertex = v;
    net_.multicast(self_, msg);
}

void MysticetiNode::finalize_fallback(const std::vector<PoSTPtr>& decided, const PoSTPtr& leader,
                                      bool) {
    const Round top = leader->vertex->round();
    fixed_[top] = store_.find(leader->vertex->digest());
    current_round_ = std::max(current_round_, top + 2);
    if (can_create() && current_round_ == top + 2)
        create_vertex(top + 2, transition_refs(decided));
    else
        set_timer(timer_leader, now() + leader_timeout(), current_round_);
    try_decide();
    try_advance();
}

}  // namespace lifefin
