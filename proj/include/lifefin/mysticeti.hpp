#pragma once

#include <lifefin/node.hpp>

#include <functional>

namespace lifefin {

enum class Pattern { skip, certified, neither };
const char* to_string(Pattern p);

// skip: >= 2f+1 round r+1 creators have a vertex not referencing v;
// certified: >= 2f+1 round r+1 creators reference v.
Pattern classify_pattern(const DagStore& store, const VertexRef& v);

struct SlotStatus {
    enum class Kind { to_commit, to_skip, undecided };
    Round round = 0;
    Kind kind = Kind::undecided;
    VertexPtr leader;     // set for to_commit
    bool direct = false;  // decided by the direct rule (or fixed by a fallback)
    bool decided() const { return kind != Kind::undecided; }
};
const char* to_string(SlotStatus::Kind k);

using LeaderFn = std::function<NodeId(Round)>;

// Direct rule for the slot (r, leader). Candidates are every stored vertex in
// the slot, equivocations included.
SlotStatus direct_decide(const DagStore& store, Round r, NodeId leader);
// True when the anchor's causal history holds round r+1 vertices from >= 2f+1
// distinct creators that reference the candidate.
bool certified_in_history(const DagStore& store, const Vertex& anchor, const Vertex& candidate);
// Indirect rule; `later` holds statuses of rounds above r, ascending.
SlotStatus indirect_decide(const DagStore& store, Round r, NodeId leader,
                           const std::vector<SlotStatus>& later);

// Memo for direct decisions. A decided slot never changes; an undecided one is
// recomputed only when rounds r+1 or r+2 gained vertices.
class DecisionCache {
public:
    SlotStatus direct(const DagStore& store, Round r, NodeId leader);

private:
    struct Entry {
        SlotStatus status;
        std::uint32_t seen_r1 = 0, seen_r2 = 0;
        NodeId leader = 0;
    };
    std::map<Round, Entry> entries_;
};

// Statuses for rounds lo..hi (ascending). `fixed` pins rounds to a to-commit
// vertex chosen by a fallback.
std::vector<SlotStatus> decide_rounds(const DagStore& store, Round lo, Round hi,
                                      const LeaderFn& leader_of,
                                      const std::map<Round, VertexPtr>& fixed,
                                      DecisionCache* cache = nullptr);

// Uncertified DAG engine: best-effort vertex broadcast, pattern-based leader
// decisions, pull-based sync of missing ancestors.
class MysticetiNode final : public Node {
public:
    MysticetiNode(NodeId self, const NodeConfig& cfg, SimNet& net, const KeyRing& keys,
                  Strategy& strategy, MetricsLog& log);

    void start() override;
    Round current_round() const override { return current_round_; }
    // Every finalized slot, oldest first.
    const std::vector<SlotStatus>& finalized() const { return finalized_; }

protected:
    void handle_dag(NodeId from, const MessagePtr& m) override;
    void handle_timer(std::uint8_t kind, std::uint64_t value) override;
    void on_inserted(const VertexPtr& v) override;
    void finalize_fallback(const std::vector<PoSTPtr>& decided, const PoSTPtr& leader,
                           bool predefined) override;

private:
    static constexpr std::uint8_t timer_leader = timer_engine;

    void try_advance();
    void try_decide();
    void create_vertex(Round r, std::vector<VertexRef> refs);
    SimTime leader_timeout() const;

    Round current_round_ = 1;
    std::set<Round> timed_out_;
    std::map<Round, VertexPtr> fixed_;
    DecisionCache cache_;
    std::vector<SlotStatus> finalized_;
    bool deciding_ = false;
};

}  // namespace lifefin
