#pragma once

#include <lifefin/node.hpp>
#include <lifefin/rbc.hpp>

namespace lifefin {

// Certified DAG engine. Vertices travel over reliable broadcast; the leader of
// round r is directly committed once 2f+1 first messages of round r+1 vertices
// reference it.
class SailfishNode final : public Node {
public:
    struct DirectCommit {
        Round round = 0;
        std::uint32_t votes = 0;       // first messages referencing the leader
        std::uint32_t considered = 0;  // first messages seen for round+1
    };

    SailfishNode(NodeId self, const NodeConfig& cfg, SimNet& net, const KeyRing& keys,
                 Strategy& strategy, MetricsLog& log);

    void start() override;
    Round current_round() const override { return current_round_; }
    const std::vector<DirectCommit>& direct_commits() const { return direct_; }
    std::uint64_t rbc_malformed() const { return rbc_.malformed(); }

protected:
    void handle_dag(NodeId from, const MessagePtr& m) override;
    void handle_timer(std::uint8_t kind, std::uint64_t value) override;
    void on_inserted(const VertexPtr& v) override;
    void finalize_fallback(const std::vector<PoSTPtr>& decided, const PoSTPtr& leader,
                           bool predefined) override;

private:
    static constexpr std::uint8_t timer_leader = timer_engine;

    void try_advance();
    void create_vertex(Round r, std::vector<VertexRef> refs, std::optional<NoVoteCertificate> aux,
                       bool leader, bool restriction_ok);
    void on_first_message(const VertexPtr& v);
    void try_commit(Round r);
    void commit_leader(const VertexPtr& v, CommitKind kind);
    std::optional<NoVoteCertificate> no_vote_cert(Round r) const;
    void on_no_vote(NodeId from, const NoVoteMessage& m);
    void send_no_vote(Round r);
    SimTime leader_timeout() const;

    RbcEngine rbc_;
    Round current_round_ = 1;
    std::set<Round> timed_out_;
    std::map<Round, std::map<NodeId, VertexPtr>> first_;
    std::map<Round, std::map<NodeId, Signature>> no_votes_;
    std::set<Round> no_vote_sent_;
    std::vector<DirectCommit> direct_;
};

}  // namespace lifefin
