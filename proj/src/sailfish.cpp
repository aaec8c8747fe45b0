#include <lifefin/sailfish.hpp>

#include <algorithm>

namespace lifefin {

SailfishNode::SailfishNode(NodeId self, const NodeConfig& cfg, SimNet& net, const KeyRing& keys,
                           Strategy& strategy, MetricsLog& log)
    : Node(self, cfg, DagMode::certified, net, keys, strategy, log),
      rbc_(cfg.n, cfg.f, self, MsgClass::dag,
           [this](NodeId to, std::shared_ptr<const RbcMessage> m) { net_.send(self_, to, std::move(m)); }) {
    rbc_.set_vote_filter([this](const RbcId& id, const Digest&) {
        return !(strategy_.withhold_leader_votes(self_, now()) && id.sender == leader_of(id.round));
    });
}

SimTime SailfishNode::leader_timeout() const {
    return cfg_.leader_timeout > 0 ? cfg_.leader_timeout : 5000;
}

void SailfishNode::start() {
    Node::start();
    set_timer(timer_leader, now() + leader_timeout(), current_round_);
    try_advance();
}

void SailfishNode::handle_dag(NodeId from, const MessagePtr& m) {
    if (auto* r = dynamic_cast<const RbcMessage*>(m.get())) {
        for (const auto& ev : rbc_.on_message(from, *r)) {
            auto v = ev.payload ? Vertex::parse(*ev.payload) : nullptr;
            if (!v || v->round() != ev.id.round || v->creator() != ev.id.sender) continue;
            if (ev.kind == RbcEvent::Kind::first_message)
                on_first_message(v);
            else
                ingest(v, MsgClass::dag, false);
        }
        return;
    }
    if (auto* nv = dynamic_cast<const NoVoteMessage*>(m.get())) {
        on_no_vote(from, *nv);
        return;
    }
}

void SailfishNode::handle_timer(std::uint8_t kind, std::uint64_t value) {
    if (kind != timer_leader) return;
    timed_out_.insert(value);
    if (mode_ == Mode::optimistic) try_advance();
}

void SailfishNode::on_inserted(const VertexPtr& v) {
    auto lv = leader_vertex(v->round());
    if (lv && lv->digest() == v->digest()) try_commit(v->round());
    try_advance();
}

void SailfishNode::on_first_message(const VertexPtr& v) {
    auto& slot = first_[v->round()];
    if (!slot.emplace(v->creator(), v).second) return;
    if (slot.size() >= store_.quorum() && v->round() > 1) try_commit(v->round() - 1);
}

void SailfishNode::try_commit(Round r) {
    if (committed_round_ >= r) return;
    auto lv = leader_vertex(r);
    if (!lv) return;
    auto it = first_.find(r + 1);
    if (it == first_.end() || it->second.size() < store_.quorum()) return;
    std::uint32_t votes = 0;
    for (const auto& [_, v] : it->second)
        if (v->references(lv->digest())) ++votes;
    if (votes < store_.quorum()) return;
    direct_.push_back(DirectCommit{r, votes, static_cast<std::uint32_t>(it->second.size())});
    commit_leader(lv, CommitKind::direct);
}

void SailfishNode::commit_leader(const VertexPtr& v, CommitKind kind) {
    std::vector<VertexPtr> stack{v};
    VertexPtr cur = v;
    for (Round r = v->round() - 1; r > committed_round_; --r) {
        auto vs = leader_vertex(r);
        if (vs && store_.path_exists(cur->digest(), vs->digest())) {
            stack.push_back(vs);
            cur = vs;
        }
    }
    committed_round_ = v->round();
    for (std::size_t i = stack.size(); i-- > 0;)
        order_leader(stack[i], i == 0 ? kind : CommitKind::indirect);
}

std::optional<NoVoteCertificate> SailfishNode::no_vote_cert(Round r) const {
    auto it = no_votes_.find(r);
    if (it == no_votes_.end() || it->second.size() < store_.quorum()) return std::nullopt;
    std::vector<Signature> sigs;
    for (const auto& [_, s] : it->second) sigs.push_back(s);
    auto res = form_certificate(sigs, store_.quorum(), &keys_);
    if (!std::holds_alternative<QuorumCertificate>(res)) return std::nullopt;
    return NoVoteCertificate{r, std::get<QuorumCertificate>(res)};
}

void SailfishNode::on_no_vote(NodeId from, const NoVoteMessage& m) {
    if (m.sig.signer != from || m.sig.msg != no_vote_digest(m.round) || !keys_.verify(m.sig)) return;
    // A no-vote contradicted by the signer's own delivered vertex is dropped.
    auto lv = leader_vertex(m.round);
    auto own = store_.get(m.round + 1, from);
    if (lv && own && own->references(lv->digest())) {
        ++audit_.invalid_no_votes;
        return;
    }
    no_votes_[m.round].emplace(from, m.sig);
    try_advance();
}

void SailfishNode::try_advance() {
    while (can_create()) {
        const Round r = current_round_;
        if (store_.count_round(r) < store_.quorum()) return;
        auto lv = leader_vertex(r);
        if (!lv && !timed_out_.count(r)) return;

        const Round next = r + 1;
        std::vector<VertexRef> refs;
        std::set<NodeId> creators;
        const bool exclude = strategy_.exclude_leader_refs(self_, now());
        for (const auto& v : store_.by_round(r)) {
            if (exclude && lv && v->digest() == lv->digest()) continue;
            refs.push_back(v->ref());
            creators.insert(v->creator());
        }
        if (creators.size() < store_.quorum()) return;

        const bool is_leader = leader_of(next) == self_;
        if (is_leader && strategy_.skip_leader_vertex(self_, now())) {
            current_round_ = next;
            set_timer(timer_leader, now() + leader_timeout(), next);
            continue;
        }
        std::optional<NoVoteCertificate> aux;
        const bool refs_leader = lv && std::any_of(refs.begin(), refs.end(), [&](const VertexRef& x) {
                                     return x.digest == lv->digest();
                                 });
        if (!refs_leader) send_no_vote(r);
        if (is_leader && !refs_leader) {
            aux = no_vote_cert(r);
            if (!aux) {
                // Others moved on without this leader: give up the slot.
                if (store_.count_round(next) >= store_.quorum()) {
                    current_round_ = next;
                    set_timer(timer_leader, now() + leader_timeout(), next);
                    continue;
                }
                return;
            }
        }
        create_vertex(next, std::move(refs), std::move(aux), is_leader, true);
    }
}

void SailfishNode::send_no_vote(Round r) {
    if (!no_vote_sent_.insert(r).second) return;
    const auto sig = keys_.sign(self_, no_vote_digest(r));
    if (leader_of(r + 1) == self_) {
        no_votes_[r].emplace(self_, sig);
        return;
    }
    auto nv = std::make_shared<NoVoteMessage>();
    nv->round = r;
    nv->sig = sig;
    net_.send(self_, leader_of(r + 1), nv);
}

void SailfishNode::create_vertex(Round r, std::vector<VertexRef> refs,
                                 std::optional<NoVoteCertificate> aux, bool leader,
                                 bool restriction_ok) {
    auto v = Vertex::make(r, self_, next_payload(), refs, aux);
    note_created(v, leader, restriction_ok);
    current_round_ = r;
    set_timer(timer_leader, now() + leader_timeout(), r);
    if (strategy_.equivocates(self_, now())) {
        // Two proposals for one instance, split between the halves.
        Bytes alt_payload = v->payload();
        alt_payload.push_back(0xee);
        auto alt = Vertex::make(r, self_, std::move(alt_payload), refs, aux);
        for (NodeId to = 0; to < cfg_.n; ++to) {
            const auto& pick = to < cfg_.n / 2 ? v : alt;
            auto bytes = std::make_shared<const Bytes>(pick->serialize());
            net_.send(self_, to,
                      RbcEngine::make(MsgClass::dag, RbcId{r, self_}, RbcPhase::propose,
                                      sha256(*bytes), bytes));
        }
        return;
    }
    rbc_.broadcast(RbcId{r, self_}, std::make_shared<const Bytes>(v->serialize()));
}

void SailfishNode::finalize_fallback(const std::vector<PoSTPtr>& decided, const PoSTPtr& leader,
                                     bool predefined) {
    const Round top = leader->vertex->round();
    if (!predefined && top > 1) {
        const Round r = top - 1;
        if (r > committed_round_) {
            VertexPtr prev;
            for (const auto& sb : decided) {
                for (const auto& ref : sb->vertex->refs()) {
                    if (ref.round == r && ref.creator == leader_of(r)) {
                        prev = store_.find(ref.digest);
                        break;
                    }
                }
                if (prev) break;
            }
            if (prev) commit_leader(prev, CommitKind::fallback);
        }
    }
    auto sbl = store_.find(leader->vertex->digest());
    if (sbl && committed_round_ < top) commit_leader(sbl, CommitKind::fallback);

    current_round_ = std::max(current_round_, top + 2);
    if (can_create() && current_round_ == top + 2)
        create_vertex(top + 2, transition_refs(decided), std::nullopt, leader_of(top + 2) == self_,
                      true);
    else
        set_timer(timer_leader, now() + leader_timeout(), current_round_);
    try_advance();
}

}  // namespace lifefin
