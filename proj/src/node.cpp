#include <lifefin/node.hpp>

#include <algorithm>

namespace lifefin {

namespace {

std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kValueMask = (1ULL << 56) - 1;
constexpr int kMaxSyncRetries = 30;

}  // namespace

const char* to_string(EngineKind e) {
    return e == EngineKind::certified ? "certified" : "uncertified";
}

std::optional<EngineKind> parse_engine(const std::string& s) {
    if (s == "certified" || s == "sailfish") return EngineKind::certified;
    if (s == "uncertified" || s == "mysticeti") return EngineKind::uncertified;
    return std::nullopt;
}

const char* to_string(CommitKind k) {
    switch (k) {
        case CommitKind::direct: return "direct";
        case CommitKind::indirect: return "indirect";
        case CommitKind::fallback: return "fallback";
    }
    return "?";
}

const char* to_string(TriggerReason r) {
    return r == TriggerReason::byte_limit ? "byte_limit" : "stuck";
}

Node::Node(NodeId self, const NodeConfig& cfg, DagMode dag_mode, SimNet& net, const KeyRing& keys,
           Strategy& strategy, MetricsLog& log)
    : self_(self),
      cfg_(cfg),
      net_(net),
      keys_(keys),
      strategy_(strategy),
      log_(log),
      store_(cfg.n, cfg.f, dag_mode) {}

Node::~Node() = default;

void Node::start() {
    for (NodeId c = 0; c < cfg_.n; ++c) {
        auto g = Vertex::genesis(c);
        insert_now(g, MsgClass::dag);
        if (c == self_) note_created(g, false, true);
    }
}

NodeId Node::leader_of(Round r) const {
    auto it = leader_override_.find(r);
    if (it != leader_override_.end()) return it->second;
    return static_cast<NodeId>(r % cfg_.n);
}

VertexPtr Node::leader_vertex(Round r) const {
    auto it = fallback_leader_.find(r);
    if (it != fallback_leader_.end()) return store_.find(it->second);
    return store_.get(r, leader_of(r));
}

const AcsInstance* Node::acs(std::uint64_t view) const {
    auto it = acs_.find(view);
    return it == acs_.end() ? nullptr : it->second.get();
}

bool Node::can_create() const {
    return mode_ == Mode::optimistic && !net_.memory().exhausted(self_) && !net_.crashed(self_);
}

void Node::set_timer(std::uint8_t kind, SimTime at, std::uint64_t value) {
    net_.set_timer(self_, at, (static_cast<std::uint64_t>(kind) << 56) | (value & kValueMask));
}

void Node::on_timer(std::uint64_t tag) {
    const auto kind = static_cast<std::uint8_t>(tag >> 56);
    const std::uint64_t value = tag & kValueMask;
    if (kind == timer_stuck) {
        if (stuck_timer_at_ <= now()) stuck_timer_at_ = kNever;
        maybe_trigger();
    } else if (kind == timer_sync) {
        on_sync_timer();
    } else {
        handle_timer(kind, value);
    }
}

// ---------------------------------------------------------------------------
// Mempool

std::shared_ptr<const Bytes> Node::next_payload() {
    auto out = std::make_shared<Bytes>();
    if (cfg_.tx_rate == 0 || cfg_.tx_size == 0) return out;
    const std::uint64_t now_ms = static_cast<std::uint64_t>(std::max<SimTime>(0, now()));
    const std::uint64_t last = now_ms * cfg_.tx_rate / 1000;  // highest arrived index
    while (true) {
        const std::uint64_t k = self_ + next_tx_ * cfg_.n;
        if (k > last || out->size() + cfg_.tx_size > cfg_.max_batch_bytes) break;
        std::uint64_t state = cfg_.seed ^ (k * 0xd1b54a32d192ed03ULL);
        for (std::size_t i = 0; i < cfg_.tx_size; i += 8) {
            std::uint64_t word = splitmix(state);
            for (std::size_t j = 0; j < 8 && i + j < cfg_.tx_size; ++j)
                out->push_back(static_cast<std::uint8_t>(word >> (8 * j)));
        }
        ++next_tx_;
    }
    return out;
}

void Node::note_created(const VertexPtr& v, bool leader, bool restriction_ok) {
    created_.push_back(CreatedVertex{v->ref(), now(), v->size(), leader, restriction_ok});
    if (!last_created_ || v->round() > last_created_->round()) last_created_ = v;
    log_.emit(now(), self_, MetricKind::vertex_created, v->round(), v->size());
}

// ---------------------------------------------------------------------------
// Store insertion and sync

bool Node::is_transition_vertex(const Vertex& v) const {
    auto it = transition_allowed_.find(v.round());
    if (it == transition_allowed_.end() || v.refs().size() != it->second.size()) return false;
    for (const auto& ref : v.refs())
        if (!it->second.count(ref.digest)) return false;
    return true;
}

bool Node::shape_ok(const Vertex& v) const {
    for (const auto& ref : v.refs())
        if (ref.round + 1 != v.round()) return is_transition_vertex(v);
    return true;
}

std::vector<VertexRef> Node::transition_refs(const std::vector<PoSTPtr>& decided) const {
    std::vector<VertexRef> refs;
    for (const auto& sb : decided) refs.push_back(sb->vertex->ref());
    return refs;
}

void Node::ingest(const VertexPtr& v, MsgClass sync_cls, bool ask_peers) {
    if (store_.contains(v->digest()) || parked_.count(v->digest())) return;
    if (!shape_ok(*v)) {
        // A graceful-transition vertex may arrive before this node decides the view.
        if (v->round() > r_fb_ + 1 && !transition_allowed_.count(v->round()) &&
            shape_pending_.size() < 4 * cfg_.n) {
            shape_pending_.push_back(v);
        } else {
            ++audit_.shape_rejected;
        }
        return;
    }
    auto missing = store_.missing_refs(*v);
    if (missing.empty()) {
        insert_now(v, sync_cls);
        return;
    }
    parked_[v->digest()] = Parked{v, sync_cls};
    std::vector<Digest> want;
    for (const auto& m : missing) {
        waiting_on_[m.digest].push_back(v->digest());
        want.push_back(m.digest);
    }
    if (ask_peers) request_sync(want, sync_cls);
}

void Node::insert_now(const VertexPtr& first, MsgClass cls) {
    std::vector<std::pair<VertexPtr, MsgClass>> work{{first, cls}};
    auto& mem = net_.memory();
    while (!work.empty()) {
        auto [v, c] = work.back();
        work.pop_back();
        if (store_.contains(v->digest())) continue;
        bool on_reserve = false;
        if (mem.charge(self_, v->size(), ChargeClass::dag) == ChargeResult::exhausted) {
            // Decided-history vertices may still land, on the reserve; refunded at ordering.
            if (c != MsgClass::fallback ||
                mem.charge(self_, v->size(), ChargeClass::fallback) == ChargeResult::exhausted) {
                ++audit_.reserve_refused;
                continue;
            }
            on_reserve = true;
        }
        auto res = store_.insert(v);
        const bool stored = res.ok() || (res.status == InsertStatus::equivocation &&
                                         store_.contains(v->digest()));
        if (!stored) {
            mem.refund(self_, v->size(), on_reserve ? ChargeClass::fallback : ChargeClass::dag);
            continue;
        }
        if (on_reserve) reserve_vertices_.insert(v->digest());
        outstanding_.erase(v->digest());
        log_.emit(now(), self_, MetricKind::vertex_proposed, v->size());
        if (!exhausted_logged_ && mem.account(self_).ever_exhausted) {
            exhausted_logged_ = true;
            log_.emit(now(), self_, MetricKind::exhausted);
        }
        auto wit = waiting_on_.find(v->digest());
        if (wit != waiting_on_.end()) {
            auto children = std::move(wit->second);
            waiting_on_.erase(wit);
            for (const auto& cd : children) {
                auto pit = parked_.find(cd);
                if (pit == parked_.end()) continue;
                if (!store_.missing_refs(*pit->second.v).empty()) continue;
                work.emplace_back(pit->second.v, pit->second.cls);
                parked_.erase(pit);
            }
        }
        if (mode_ == Mode::optimistic) on_inserted(v);
    }
    recheck_post_buffer();
    try_finalize();
    maybe_trigger();
}

void Node::request_sync(const std::vector<Digest>& wanted, MsgClass cls) {
    std::vector<Digest> fresh;
    for (const auto& d : wanted) {
        if (store_.contains(d) || outstanding_.count(d)) continue;
        outstanding_.emplace(d, std::make_pair(cls, 0));
        fresh.push_back(d);
    }
    if (fresh.empty()) return;
    ++audit_.sync_requests;
    auto req = std::make_shared<SyncRequest>();
    req->klass = cls;
    req->wanted = std::move(fresh);
    for (NodeId to = 0; to < cfg_.n; ++to)
        if (to != self_) net_.send(self_, to, req);
    if (!sync_timer_armed_) {
        sync_timer_armed_ = true;
        set_timer(timer_sync, now() + 4 * cfg_.delta, 0);
    }
}

void Node::on_sync_timer() {
    sync_timer_armed_ = false;
    std::map<MsgClass, std::vector<Digest>> resend;
    for (auto it = outstanding_.begin(); it != outstanding_.end();) {
        if (store_.contains(it->first) || it->second.second >= kMaxSyncRetries) {
            it = outstanding_.erase(it);
            continue;
        }
        ++it->second.second;
        resend[it->second.first].push_back(it->first);
        ++it;
    }
    for (auto& [cls, list] : resend) {
        if (cls == MsgClass::dag && mode_ == Mode::fallback) continue;
        auto req = std::make_shared<SyncRequest>();
        req->klass = cls;
        req->wanted = list;
        for (NodeId to = 0; to < cfg_.n; ++to)
            if (to != self_) net_.send(self_, to, req);
    }
    if (!outstanding_.empty()) {
        sync_timer_armed_ = true;
        set_timer(timer_sync, now() + 4 * cfg_.delta, 0);
    }
}

void Node::handle_sync_request(NodeId from, const SyncRequest& req) {
    auto rep = std::make_shared<SyncReply>();
    rep->klass = req.klass;
    for (const auto& d : req.wanted)
        if (auto v = store_.find(d)) rep->vertices.push_back(v);
    if (!rep->vertices.empty()) net_.send(self_, from, rep);
}

void Node::handle_sync_reply(const SyncReply& rep) {
    for (const auto& v : rep.vertices) {
        if (!outstanding_.count(v->digest())) continue;  // unsolicited
        ingest(v, rep.klass, true);
    }
}

// ---------------------------------------------------------------------------
// Ordering

void Node::order_leader(const VertexPtr& leader, CommitKind kind) {
    auto hist = store_.causal_history(leader->ref());
    if (std::holds_alternative<MissingHistory>(hist)) {
        ++audit_.ordered_without_history;
        return;
    }
    auto& list = std::get<std::vector<VertexPtr>>(hist);
    std::size_t dag_bytes = 0, reserve_bytes = 0;
    for (const auto& v : list) {
        if (reserve_vertices_.erase(v->digest()))
            reserve_bytes += v->size();
        else
            dag_bytes += v->size();
    }
    const std::size_t released = store_.mark_ordered(list);
    net_.memory().refund(self_, dag_bytes, ChargeClass::dag);
    if (reserve_bytes) net_.memory().refund(self_, reserve_bytes, ChargeClass::fallback);
    ordered_.insert(ordered_.end(), list.begin(), list.end());
    commits_.push_back(LeaderCommit{leader->round(), leader->creator(), leader->digest(), kind, now()});
    log_.emit(now(), self_, MetricKind::vertex_committed, released);
    log_.emit(now(), self_, MetricKind::leader_committed, leader->round(),
              static_cast<std::uint64_t>(kind), leader->creator());
    last_commit_time_ = now();
}

// ---------------------------------------------------------------------------
// Message dispatch

void Node::on_message(NodeId from, const MessagePtr& m) {
    if (auto* p = dynamic_cast<const PostMessage*>(m.get())) {
        if (!p->post || !p->post->vertex) return;
        if (p->post->view >= r_fb_ && !charge_fallback(p->post->view, m->size())) return;
        on_post(from, p->post);
        return;
    }
    if (auto* p = dynamic_cast<const PostVoteMessage*>(m.get())) {
        if (p->view >= r_fb_ && !charge_fallback(p->view, m->size())) return;
        on_post_vote(from, *p);
        return;
    }
    if (auto* a = dynamic_cast<const AbaMessage*>(m.get())) {
        if (strategy_.silent_in_acs(self_, now())) return;
        auto* inst = acs_for(a->view, true);
        if (!inst || !charge_fallback(a->view, m->size())) return;
        inst->on_aba(from, *a);
        after_acs_message(a->view);
        return;
    }
    if (auto* r = dynamic_cast<const RbcMessage*>(m.get()); r && r->klass == MsgClass::fallback) {
        if (strategy_.silent_in_acs(self_, now())) return;
        auto* inst = acs_for(r->id.round, true);
        if (!inst || !charge_fallback(r->id.round, m->size())) return;
        inst->on_rbc(from, *r);
        after_acs_message(r->id.round);
        return;
    }
    if (auto* s = dynamic_cast<const SyncRequest*>(m.get())) {
        handle_sync_request(from, *s);
        return;
    }
    if (auto* s = dynamic_cast<const SyncReply*>(m.get())) {
        if (s->klass == MsgClass::fallback) {
            // Not charged as a message: every peer answers the same request, so
            // duplicates are dropped unheld and kept vertices pay in insert_now.
            handle_sync_reply(*s);
            return;
        }
    }
    if (mode_ == Mode::fallback) {
        deferred_.emplace_back(from, m);
        return;
    }
    if (auto* s = dynamic_cast<const SyncReply*>(m.get())) {
        handle_sync_reply(*s);
        return;
    }
    handle_dag(from, m);
}

// ---------------------------------------------------------------------------
// Fallback path

FallbackRecord& Node::record_for(std::uint64_t view) {
    for (auto& r : fallbacks_)
        if (r.view == view) return r;
    fallbacks_.push_back(FallbackRecord{});
    fallbacks_.back().view = view;
    return fallbacks_.back();
}

bool Node::charge_fallback(std::uint64_t view, std::size_t bytes) {
    if (view < r_fb_) return true;  // finished instance, nothing retained
    if (net_.memory().charge(self_, bytes, ChargeClass::fallback) == ChargeResult::exhausted) {
        ++audit_.reserve_refused;
        return false;
    }
    fb_bytes_[view] += bytes;
    return true;
}

void Node::maybe_trigger() {
    if (!cfg_.fallback.enabled || mode_ == Mode::fallback || net_.crashed(self_)) return;
    if (store_.uncommitted_bytes() > cfg_.fallback.uncommitted_limit) {
        switch_fallback(TriggerReason::byte_limit);
        return;
    }
    if (post_clock_ == kNever) return;
    const SimTime deadline = std::max(post_clock_, last_commit_time_) + cfg_.fallback.stuck_timeout;
    if (now() >= deadline) {
        switch_fallback(TriggerReason::stuck);
    } else if (stuck_timer_at_ != deadline) {
        stuck_timer_at_ = deadline;
        set_timer(timer_stuck, deadline, 0);
    }
}

void Node::switch_fallback(TriggerReason why) {
    if (mode_ == Mode::fallback) return;
    mode_ = Mode::fallback;
    auto& rec = record_for(r_fb_);
    rec.trigger_time = now();
    rec.reason = why;
    rec.ub_at_trigger = store_.uncommitted_bytes();
    log_.emit(now(), self_, MetricKind::fallback_triggered, static_cast<std::uint64_t>(why),
              store_.uncommitted_bytes());
    strategy_.on_fallback_trigger(net_, now());
    create_post();
}

void Node::create_post() {
    auto sb = std::make_shared<PoSTBlock>();
    sb->view = r_fb_;
    sb->creator = self_;
    if (strategy_.phantom_posts(self_, now())) {
        // Vertex one round ahead whose parents exist nowhere.
        const Round r = current_round() + 1;
        std::vector<VertexRef> refs;
        for (NodeId c = 0; c < 2 * cfg_.f + 1; ++c) {
            Writer w;
            w.u64(r_fb_);
            w.u32(self_);
            w.u32(c);
            refs.push_back(VertexRef{r - 1, c, sha256(w.bytes())});
        }
        sb->vertex = Vertex::make(r, self_, Bytes{}, std::move(refs));
    } else {
        // Own vertex, possibly still in flight; the stored copy may lag behind.
        sb->vertex = last_created_ ? last_created_ : store_.latest_of(self_);
    }
    own_post_ = sb;
    own_sigs_.clear();
    own_proposed_ = false;
    auto msg = std::make_shared<PostMessage>();
    msg->post = sb;
    net_.multicast(self_, msg);
    if (strategy_.phantom_posts(self_, now())) phantom_propose();
}

void Node::phantom_propose() {
    // Forged certificate: correct signers' tags are garbage.
    PoSTBlock forged = *own_post_;
    QuorumCertificate qc;
    qc.msg = forged.sign_digest();
    for (NodeId s = 0; s < 2 * cfg_.f + 1; ++s) {
        Signature sig;
        sig.signer = s;
        sig.msg = qc.msg;
        sig.tag = sha256(std::string_view("forged"));
        qc.sigs.push_back(sig);
    }
    forged.cert = qc;
    auto bytes = std::make_shared<const Bytes>(forged.serialize());
    auto m = RbcEngine::make(MsgClass::fallback, RbcId{r_fb_, self_}, RbcPhase::propose,
                             sha256(*bytes), bytes);
    net_.multicast(self_, m);
}

PostValidity Node::check_post(const PoSTBlock& sb) const {
    if (!sb.vertex || sb.creator >= cfg_.n || sb.vertex->creator() != sb.creator)
        return PostValidity::malformed;
    if (sb.view != r_fb_) return PostValidity::view_mismatch;
    if (posts_seen_.count(sb.creator)) return PostValidity::duplicate;
    auto latest = store_.latest_of(sb.creator);
    if (latest && latest->digest() != sb.vertex->digest() && sb.vertex->round() <= latest->round())
        return PostValidity::stale_vertex;
    return PostValidity::valid;
}

bool Node::missing_history(const PoSTBlock& sb, std::vector<Digest>* missing) const {
    if (store_.contains(sb.vertex->digest())) return false;
    auto refs = store_.missing_refs(*sb.vertex);
    if (refs.empty()) return false;
    if (missing)
        for (const auto& r : refs) missing->push_back(r.digest);
    return true;
}

void Node::on_post(NodeId from, const PoSTPtr& sb) {
    if (from != sb->creator) {
        ++audit_.posts_rejected;
        return;
    }
    if (sb->view > r_fb_) {
        future_posts_.emplace_back(from, sb);
        return;
    }
    if (sb->view < r_fb_) return;
    if (post_clock_ == kNever) post_clock_ = now();
    const auto validity = check_post(*sb);
    if (validity != PostValidity::valid) {
        ++audit_.posts_rejected;
        maybe_trigger();
        return;
    }
    posts_seen_.insert(sb->creator);
    maybe_trigger();
    if (strategy_.withhold_post_signature(self_, now())) return;
    if (voted_.count({sb->creator, sb->view})) return;
    std::vector<Digest> missing;
    const auto ahead = static_cast<std::int64_t>(sb->vertex->round()) -
                       static_cast<std::int64_t>(current_round());
    if (ahead <= 1 && missing_history(*sb, &missing)) {
        ++audit_.posts_buffered;
        post_buffer_.push_back(sb);
        request_sync(missing, MsgClass::fallback);
        return;
    }
    vote_post(*sb);
}

void Node::vote_post(const PoSTBlock& sb) {
    if (!voted_.insert({sb.creator, sb.view}).second) return;
    ++audit_.post_votes;
    auto vote = std::make_shared<PostVoteMessage>();
    vote->view = sb.view;
    vote->sig = keys_.sign(self_, sb.sign_digest());
    net_.send(self_, sb.creator, vote);
}

void Node::recheck_post_buffer() {
    if (post_buffer_.empty()) return;
    auto buf = std::move(post_buffer_);
    post_buffer_.clear();
    for (auto& sb : buf) {
        if (sb->view != r_fb_) continue;
        if (missing_history(*sb, nullptr))
            post_buffer_.push_back(sb);
        else
            vote_post(*sb);
    }
}

void Node::on_post_vote(NodeId from, const PostVoteMessage& m) {
    if (!own_post_ || m.view != own_post_->view || own_proposed_) return;
    if (m.sig.signer != from || m.sig.msg != own_post_->sign_digest() || !keys_.verify(m.sig)) return;
    own_sigs_.emplace(from, m.sig);
    if (own_sigs_.size() < store_.quorum()) return;
    if (strategy_.silent_in_acs(self_, now())) return;
    std::vector<Signature> sigs;
    for (const auto& [_, s] : own_sigs_) sigs.push_back(s);
    auto cert = form_certificate(sigs, store_.quorum(), &keys_);
    if (!std::holds_alternative<QuorumCertificate>(cert)) return;
    PoSTBlock full = *own_post_;
    full.cert = std::get<QuorumCertificate>(cert);
    auto* inst = acs_for(full.view, true);
    if (!inst) return;
    own_proposed_ = inst->propose(std::make_shared<const Bytes>(full.serialize()));
    if (own_proposed_) record_for(full.view).proposed = true;
    after_acs_message(full.view);
}

bool Node::acs_valid(std::uint64_t view, NodeId slot, const Bytes& proposal) const {
    auto sb = PoSTBlock::parse(proposal);
    if (!sb || sb->view != view || sb->creator != slot || sb->vertex->creator() != slot || !sb->cert)
        return false;
    return verify_certificate(*sb->cert, sb->sign_digest(), store_.quorum(), keys_);
}

AcsInstance* Node::acs_for(std::uint64_t view, bool create) {
    auto it = acs_.find(view);
    if (it != acs_.end()) return it->second.get();
    if (!create || view < r_fb_) return nullptr;
    auto inst = std::make_unique<AcsInstance>(
        cfg_.n, cfg_.f, self_, view, cfg_.seed ^ 0xac5ac5ac5ULL,
        [this](NodeId to, MessagePtr m) { net_.send(self_, to, std::move(m)); },
        [this, view](NodeId slot, const Bytes& p) { return acs_valid(view, slot, p); });
    auto* raw = inst.get();
    acs_.emplace(view, std::move(inst));
    return raw;
}

void Node::after_acs_message(std::uint64_t view) {
    if (view != r_fb_ || pending_decision_ || acs_handled_.count(view)) return;
    auto it = acs_.find(view);
    if (it == acs_.end() || !it->second->decided()) return;
    acs_handled_.insert(view);
    std::vector<PoSTPtr> decided;
    for (const auto& [slot, bytes] : it->second->output()->proposals) {
        auto sb = PoSTBlock::parse(*bytes);
        if (sb) decided.push_back(std::make_shared<const PoSTBlock>(std::move(*sb)));
    }
    auto& rec = record_for(view);
    rec.decide_time = now();
    rec.ub_at_decide = store_.uncommitted_bytes();
    Round top = 0;
    for (const auto& sb : decided) {
        rec.decided.push_back(sb->vertex->ref());
        top = std::max(top, sb->vertex->round());
    }
    rec.above_at_decide = store_.count_round(top + 1);
    log_.emit(now(), self_, MetricKind::acs_decided, view, decided.size(), fb_bytes_[view]);
    // Stop the DAG until the decided histories are in place.
    mode_ = Mode::fallback;
    pending_decision_ = std::move(decided);
    try_finalize();
}

void Node::try_finalize() {
    if (!pending_decision_ || finalizing_) return;
    finalizing_ = true;
    const auto decided = *pending_decision_;
    bool ready = true;
    for (const auto& sb : decided) {
        if (store_.contains(sb->vertex->digest())) continue;
        ready = false;
        ingest(sb->vertex, MsgClass::fallback, true);
        if (!store_.contains(sb->vertex->digest()) && !parked_.count(sb->vertex->digest()))
            request_sync({sb->vertex->digest()}, MsgClass::fallback);
    }
    if (!ready) {
        ready = std::all_of(decided.begin(), decided.end(),
                            [&](const PoSTPtr& sb) { return store_.contains(sb->vertex->digest()); });
    }
    if (!ready) {
        finalizing_ = false;
        return;
    }

    const std::uint64_t view = r_fb_;
    Round top = 0;
    for (const auto& sb : decided) top = std::max(top, sb->vertex->round());
    PoSTPtr leader;
    bool predefined = false;
    for (const auto& sb : decided) {
        if (sb->vertex->round() == top && sb->vertex->creator() == leader_of(top)) {
            leader = sb;
            predefined = true;
        }
    }
    if (!leader) {
        for (const auto& sb : decided) {
            if (sb->vertex->round() != top) continue;
            if (!leader || sb->vertex->digest() < leader->vertex->digest()) leader = sb;
        }
    }
    auto& rec = record_for(view);
    rec.leader = leader->vertex->ref();
    rec.predefined = predefined;
    log_.emit(now(), self_, MetricKind::fallback_leader, top, leader->creator, predefined ? 0 : 1);

    std::set<Digest> allowed;
    for (const auto& sb : decided) allowed.insert(sb->vertex->digest());
    transition_allowed_[top + 2] = std::move(allowed);

    leader_override_[top] = leader->creator;
    fallback_leader_[top] = leader->vertex->digest();

    pending_decision_.reset();
    mode_ = Mode::optimistic;
    finalize_fallback(decided, leader, predefined);

    const std::size_t used = fb_bytes_[view];
    rec.fallback_bytes = used;
    rec.finalize_time = now();
    rec.new_view = top;
    net_.memory().refund(self_, used, ChargeClass::fallback);
    fb_bytes_.erase(view);
    r_fb_ = top;
    post_clock_ = kNever;
    stuck_timer_at_ = kNever;
    posts_seen_.clear();
    post_buffer_.clear();
    own_post_.reset();
    own_sigs_.clear();
    own_proposed_ = false;
    finalizing_ = false;
    enter_optimistic();
}

void Node::enter_optimistic() {
    auto pending = std::move(shape_pending_);
    shape_pending_.clear();
    for (const auto& v : pending) ingest(v, MsgClass::dag, true);

    auto deferred = std::move(deferred_);
    deferred_.clear();
    for (auto& [from, m] : deferred) on_message(from, m);

    auto future = std::move(future_posts_);
    future_posts_.clear();
    for (auto& [from, sb] : future) on_post(from, sb);

    after_acs_message(r_fb_);
    maybe_trigger();
}

}  // namespace lifefin
