#pragma once

#include <lifefin/vertex.hpp>

#include <set>
#include <unordered_map>
#include <variant>
#include <vector>

namespace lifefin {

enum class DagMode { certified, uncertified };

enum class InsertStatus {
    accepted,
    duplicate,                // same digest already stored
    insufficient_references,  // round > 1 with fewer than 2f+1 references
    bad_reference,            // reference to a round >= own round, or wrong genesis shape
    equivocation,             // distinct vertex already stored for (round, creator)
    missing_parents,          // certified mode only: some reference is not stored yet
};
const char* to_string(InsertStatus s);

struct InsertResult {
    InsertStatus status = InsertStatus::accepted;
    std::vector<VertexRef> missing;  // unresolved references
    bool ok() const { return status == InsertStatus::accepted; }
};

struct MissingHistory {
    std::vector<VertexRef> refs;
};
using HistoryResult = std::variant<std::vector<VertexPtr>, MissingHistory>;

// Per-node DAG. At most one primary vertex per (round, creator). In uncertified
// mode a conflicting vertex is kept as evidence so that digests naming it resolve,
// and references may point at vertices that are not stored yet.
class DagStore {
public:
    DagStore(std::uint32_t n, std::uint32_t f, DagMode mode);

    InsertResult insert(const VertexPtr& v);

    std::uint32_t n() const { return n_; }
    std::uint32_t f() const { return f_; }
    std::uint32_t quorum() const { return 2 * f_ + 1; }
    DagMode mode() const { return mode_; }

    VertexPtr get(Round r, NodeId creator) const;
    VertexPtr find(const Digest& d) const;
    bool contains(const Digest& d) const { return by_digest_.count(d) != 0; }
    std::vector<VertexPtr> by_round(Round r) const;       // primaries, creator ascending
    std::vector<VertexPtr> all_at_round(Round r) const;   // primaries and evidence
    std::uint32_t count_round(Round r) const;
    Round max_round() const { return primary_.empty() ? 0 : primary_.size() - 1; }
    VertexPtr latest_of(NodeId creator) const;

    bool path_exists(const VertexRef& from, const VertexRef& to) const;
    bool path_exists(const Digest& from, const Digest& to) const;
    HistoryResult causal_history(const VertexRef& v) const;
    std::vector<VertexRef> missing_refs(const Vertex& v) const;

    bool is_ordered(const Digest& d) const;
    // Marks vertices ordered; returns the bytes released.
    std::size_t mark_ordered(const std::vector<VertexPtr>& vs);

    std::size_t uncommitted_bytes() const { return uncommitted_bytes_; }
    std::size_t vertex_count() const { return by_digest_.size(); }
    const std::set<NodeId>& equivocators() const { return equivocators_; }
    const std::vector<VertexPtr>& evidence() const { return evidence_; }

private:
    struct Entry {
        VertexPtr v;
        bool ordered = false;
    };

    std::uint32_t n_, f_;
    DagMode mode_;
    std::unordered_map<Digest, Entry, DigestHash> by_digest_;
    std::vector<std::vector<VertexPtr>> primary_;  // [round][creator]
    std::vector<VertexPtr> evidence_;
    std::set<NodeId> equivocators_;
    std::size_t uncommitted_bytes_ = 0;
};

}  // namespace lifefin
