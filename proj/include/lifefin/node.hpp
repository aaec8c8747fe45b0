#pragma once

#include <lifefin/acs.hpp>
#include <lifefin/adversary.hpp>
#include <lifefin/dag_store.hpp>
#include <lifefin/messages.hpp>
#include <lifefin/metrics.hpp>
#include <lifefin/post.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

namespace lifefin {

enum class EngineKind { certified, uncertified };
const char* to_string(EngineKind e);
std::optional<EngineKind> parse_engine(const std::string& s);

struct FallbackConfig {
    bool enabled = true;
    std::size_t uncommitted_limit = 8u << 20;
    SimTime stuck_timeout = 5000;
};

struct NodeConfig {
    std::uint32_t n = 4;
    std::uint32_t f = 1;
    SimTime delta = 100;
    SimTime leader_timeout = 0;  // 0: engine default
    std::size_t max_batch_bytes = 64u << 10;
    std::uint64_t tx_rate = 1000;  // system-wide tx/s, dealt round-robin
    std::size_t tx_size = 512;
    std::uint64_t seed = 1;
    FallbackConfig fallback;
};

enum class Mode { optimistic, fallback };
enum class CommitKind : std::uint8_t { direct, indirect, fallback };
enum class TriggerReason : std::uint8_t { byte_limit, stuck };
const char* to_string(CommitKind k);
const char* to_string(TriggerReason r);

struct LeaderCommit {
    Round round = 0;
    NodeId creator = 0;
    Digest digest{};
    CommitKind kind = CommitKind::direct;
    SimTime time = 0;
};

struct CreatedVertex {
    VertexRef ref;
    SimTime time = 0;
    std::size_t bytes = 0;
    bool leader = false;
    bool restriction_ok = true;  // leader vertices: predecessor referenced, NVC attached or exempt
};

struct FallbackRecord {
    std::uint64_t view = 0;
    std::optional<SimTime> trigger_time;
    TriggerReason reason = TriggerReason::byte_limit;
    std::size_t ub_at_trigger = 0;
    SimTime decide_time = -1;
    std::size_t ub_at_decide = 0;
    std::uint32_t above_at_decide = 0;  // stored vertices at (max decided round)+1
    SimTime finalize_time = -1;
    Round new_view = 0;
    std::vector<VertexRef> decided;  // vertices of the decided PoST blocks, slot order
    VertexRef leader;
    bool predefined = false;
    std::size_t fallback_bytes = 0;
    bool proposed = false;
};

struct NodeAudit {
    std::uint64_t ordered_without_history = 0;
    std::uint64_t post_votes = 0;
    std::uint64_t posts_rejected = 0;
    std::uint64_t posts_buffered = 0;
    std::uint64_t sync_requests = 0;
    std::uint64_t shape_rejected = 0;
    std::uint64_t reserve_refused = 0;
    std::uint64_t invalid_no_votes = 0;
};

// Engine-independent node: DAG store, mempool, memory charging, ordering
// bookkeeping, vertex sync and the whole fallback path (trigger, PoST
// propose/vote, certificate, ACS, finalize hand-off).
class Node : public Process {
public:
    Node(NodeId self, const NodeConfig& cfg, DagMode dag_mode, SimNet& net, const KeyRing& keys,
         Strategy& strategy, MetricsLog& log);
    ~Node() override;

    virtual void start();
    void on_message(NodeId from, const MessagePtr& m) final;
    void on_timer(std::uint64_t tag) final;

    NodeId id() const { return self_; }
    Mode mode() const { return mode_; }
    std::uint64_t fallback_view() const { return r_fb_; }
    const DagStore& store() const { return store_; }
    const std::vector<VertexPtr>& ordered() const { return ordered_; }
    const std::vector<LeaderCommit>& commits() const { return commits_; }
    const std::vector<CreatedVertex>& created() const { return created_; }
    const std::vector<FallbackRecord>& fallbacks() const { return fallbacks_; }
    const NodeAudit& audit() const { return audit_; }
    Round committed_round() const { return committed_round_; }
    virtual Round current_round() const = 0;
    NodeId leader_of(Round r) const;
    std::size_t deferred_messages() const { return deferred_.size(); }
    const AcsInstance* acs(std::uint64_t view) const;
    bool byzantine() const { return strategy_.byzantine(self_); }

protected:
    enum TimerKind : std::uint8_t { timer_stuck = 1, timer_sync = 2, timer_engine = 16 };

    // Engine interface.
    virtual void handle_dag(NodeId from, const MessagePtr& m) = 0;
    virtual void handle_timer(std::uint8_t kind, std::uint64_t value) = 0;
    virtual void on_inserted(const VertexPtr& v) = 0;
    // Called once every decided vertex is stored. SB_L is already chosen and
    // L_{r_fb} reassigned; the engine commits, creates its r_fb+2 vertex and
    // returns to the optimistic path.
    virtual void finalize_fallback(const std::vector<PoSTPtr>& decided, const PoSTPtr& leader,
                                   bool predefined) = 0;

    // Inserts v once its parents are stored; parks it and asks peers otherwise.
    void ingest(const VertexPtr& v, MsgClass sync_cls, bool ask_peers);
    void request_sync(const std::vector<Digest>& wanted, MsgClass cls);
    // Orders the leader's unordered causal history and the leader itself.
    void order_leader(const VertexPtr& leader, CommitKind kind);
    std::shared_ptr<const Bytes> next_payload();
    void note_created(const VertexPtr& v, bool leader, bool restriction_ok);
    void set_timer(std::uint8_t kind, SimTime at, std::uint64_t value);
    SimTime now() const { return net_.now(); }
    bool can_create() const;
    // Leader vertex for round r: the fallback-chosen vertex or the predefined slot.
    VertexPtr leader_vertex(Round r) const;
    bool is_transition_vertex(const Vertex& v) const;
    std::vector<VertexRef> transition_refs(const std::vector<PoSTPtr>& decided) const;
    void enter_optimistic();
    void maybe_trigger();

    NodeId self_;
    NodeConfig cfg_;
    SimNet& net_;
    const KeyRing& keys_;
    Strategy& strategy_;
    MetricsLog& log_;
    DagStore store_;
    Mode mode_ = Mode::optimistic;
    Round committed_round_ = 0;
    SimTime last_commit_time_ = 0;
    std::map<Round, NodeId> leader_override_;
    std::map<Round, Digest> fallback_leader_;
    std::map<Round, std::set<Digest>> transition_allowed_;  // r_fb+2 -> digests of V
    NodeAudit audit_;

private:
    struct Parked {
        VertexPtr v;
        MsgClass cls;
    };

    void insert_now(const VertexPtr& v, MsgClass cls);
    bool shape_ok(const Vertex& v) const;
    void handle_sync_request(NodeId from, const SyncRequest& req);
    void handle_sync_reply(const SyncReply& rep);
    void on_sync_timer();

    // Fallback path.
    bool charge_fallback(std::uint64_t view, std::size_t bytes);
    void switch_fallback(TriggerReason why);
    void create_post();
    PostValidity check_post(const PoSTBlock& sb) const;
    void on_post(NodeId from, const PoSTPtr& sb);
    bool missing_history(const PoSTBlock& sb, std::vector<Digest>* missing) const;
    void vote_post(const PoSTBlock& sb);
    void recheck_post_buffer();
    void on_post_vote(NodeId from, const PostVoteMessage& m);
    AcsInstance* acs_for(std::uint64_t view, bool create);
    bool acs_valid(std::uint64_t view, NodeId slot, const Bytes& proposal) const;
    void after_acs_message(std::uint64_t view);
    void try_finalize();
    void phantom_propose();
    FallbackRecord& record_for(std::uint64_t view);

    std::vector<VertexPtr> ordered_;
    std::vector<LeaderCommit> commits_;
    std::vector<CreatedVertex> created_;
    VertexPtr last_created_;
    std::vector<FallbackRecord> fallbacks_;

    // Mempool: transactions with index k arrive at node (k mod n) at k/tx_rate s.
    std::uint64_t next_tx_ = 0;

    std::unordered_map<Digest, Parked, DigestHash> parked_;
    std::set<Digest> reserve_vertices_;  // stored while the DAG budget was exhausted
    bool exhausted_logged_ = false;
    bool finalizing_ = false;
    std::unordered_map<Digest, std::vector<Digest>, DigestHash> waiting_on_;
    std::map<Digest, std::pair<MsgClass, int>> outstanding_;  // wanted digest -> (class, retries)
    bool sync_timer_armed_ = false;
    std::vector<VertexPtr> shape_pending_;

    std::vector<std::pair<NodeId, MessagePtr>> deferred_;

    std::uint64_t r_fb_ = 0;
    SimTime post_clock_ = kNever;
    SimTime stuck_timer_at_ = kNever;
    std::set<NodeId> posts_seen_;
    std::set<std::pair<NodeId, std::uint64_t>> voted_;
    std::vector<PoSTPtr> post_buffer_;
    std::vector<std::pair<NodeId, PoSTPtr>> future_posts_;
    PoSTPtr own_post_;
    std::map<NodeId, Signature> own_sigs_;
    bool own_proposed_ = false;
    std::map<std::uint64_t, std::unique_ptr<AcsInstance>> acs_;
    std::map<std::uint64_t, std::size_t> fb_bytes_;
    std::set<std::uint64_t> acs_handled_;
    std::optional<std::vector<PoSTPtr>> pending_decision_;
};

}  // namespace lifefin
