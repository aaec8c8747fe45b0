#include <lifefin/dag_store.hpp>

#include <algorithm>
#include <unordered_set>

namespace lifefin {

const char* to_string(InsertStatus s) {
    switch (s) {
        case InsertStatus::accepted: return "accepted";
        case InsertStatus::duplicate: return "duplicate";
        case InsertStatus::insufficient_references: return "insufficient_references";
        case InsertStatus::bad_reference: return "bad_reference";
        case InsertStatus::equivocation: return "equivocation";
        case InsertStatus::missing_parents: return "missing_parents";
    }
    return "?";
}

DagStore::DagStore(std::uint32_t n, std::uint32_t f, DagMode mode) : n_(n), f_(f), mode_(mode) {}

InsertResult DagStore::insert(const VertexPtr& v) {
    InsertResult res;
    if (v->creator() >= n_ || v->round() == 0) {
        res.status = InsertStatus::bad_reference;
        return res;
    }
    if (contains(v->digest())) {
        res.status = InsertStatus::duplicate;
        return res;
    }
    if (v->round() == 1) {
        if (!v->refs().empty()) {
            res.status = InsertStatus::bad_reference;
            return res;
        }
    } else {
        std::set<NodeId> creators;
        for (const auto& ref : v->refs()) {
            if (ref.round >= v->round() || ref.creator >= n_) {
                res.status = InsertStatus::bad_reference;
                return res;
            }
            creators.insert(ref.creator);
        }
        if (creators.size() < quorum()) {
            res.status = InsertStatus::insufficient_references;
            return res;
        }
    }
    res.missing = missing_refs(*v);
    if (mode_ == DagMode::certified && !res.missing.empty()) {
        res.status = InsertStatus::missing_parents;
        return res;
    }

    if (primary_.size() <= v->round()) primary_.resize(v->round() + 1);
    auto& slots = primary_[v->round()];
    if (slots.empty()) slots.resize(n_);
    if (slots[v->creator()]) {
        equivocators_.insert(v->creator());
        res.status = InsertStatus::equivocation;
        if (mode_ == DagMode::uncertified) {
            evidence_.push_back(v);
            by_digest_.emplace(v->digest(), Entry{v, false});
            uncommitted_bytes_ += v->size();
        }
        return res;
    }
    slots[v->creator()] = v;
    by_digest_.emplace(v->digest(), Entry{v, false});
    uncommitted_bytes_ += v->size();
    return res;
}

VertexPtr DagStore::get(Round r, NodeId creator) const {
    if (r >= primary_.size() || primary_[r].empty() || creator >= n_) return nullptr;
    return primary_[r][creator];
}

VertexPtr DagStore::find(const Digest& d) const {
    auto it = by_digest_.find(d);
    return it == by_digest_.end() ? nullptr : it->second.v;
}

std::vector<VertexPtr> DagStore::by_round(Round r) const {
    std::vector<VertexPtr> out;
    if (r >= primary_.size()) return out;
    for (const auto& v : primary_[r])
        if (v) out.push_back(v);
    return out;
}

std::vector<VertexPtr> DagStore::all_at_round(Round r) const {
    auto out = by_round(r);
    for (const auto& v : evidence_)
        if (v->round() == r) out.push_back(v);
    std::sort(out.begin(), out.end(),
              [](const VertexPtr& a, const VertexPtr& b) { return a->ref() < b->ref(); });
    return out;
}

std::uint32_t DagStore::count_round(Round r) const {
    if (r >= primary_.size()) return 0;
    std::uint32_t c = 0;
    for (const auto& v : primary_[r])
        if (v) ++c;
    return c;
}

VertexPtr DagStore::latest_of(NodeId creator) const {
    for (Round r = max_round(); r >= 1; --r) {
        if (auto v = get(r, creator)) return v;
    }
    return nullptr;
}

bool DagStore::path_exists(const VertexRef& from, const VertexRef& to) const {
    if (from.round < to.round) return false;
    return path_exists(from.digest, to.digest);
}

bool DagStore::path_exists(const Digest& from, const Digest& to) const {
    auto src = find(from);
    auto dst = find(to);
    if (!src || !dst) return false;
    if (from == to) return true;
    const Round floor = dst->round();
    std::vector<const Vertex*> stack{src.get()};
    std::unordered_set<Digest, DigestHash> seen{from};
    while (!stack.empty()) {
        const Vertex* cur = stack.back();
        stack.pop_back();
        for (const auto& ref : cur->refs()) {
            if (ref.digest == to) return true;
            if (ref.round <= floor) continue;
            if (!seen.insert(ref.digest).second) continue;
            auto next = find(ref.digest);
            if (next) stack.push_back(next.get());
        }
    }
    return false;
}

HistoryResult DagStore::causal_history(const VertexRef& target) const {
    auto root = find(target.digest);
    if (!root) return MissingHistory{{target}};
    std::vector<VertexPtr> out;
    std::set<VertexRef> missing;
    std::unordered_set<Digest, DigestHash> seen{target.digest};
    std::vector<VertexPtr> stack{root};
    while (!stack.empty()) {
        VertexPtr cur = stack.back();
        stack.pop_back();
        if (is_ordered(cur->digest())) continue;
        out.push_back(cur);
        for (const auto& ref : cur->refs()) {
            if (!seen.insert(ref.digest).second) continue;
            auto next = find(ref.digest);
            if (!next)
                missing.insert(ref);
            else
                stack.push_back(next);
        }
    }
    if (!missing.empty()) return MissingHistory{{missing.begin(), missing.end()}};
    std::sort(out.begin(), out.end(),
              [](const VertexPtr& a, const VertexPtr& b) { return a->ref() < b->ref(); });
    return out;
}

std::vector<VertexRef> DagStore::missing_refs(const Vertex& v) const {
    std::vector<VertexRef> out;
    for (const auto& ref : v.refs())
        if (!contains(ref.digest)) out.push_back(ref);
    return out;
}

bool DagStore::is_ordered(const Digest& d) const {
    auto it = by_digest_.find(d);
    return it != by_digest_.end() && it->second.ordered;
}

std::size_t DagStore::mark_ordered(const std::vector<VertexPtr>& vs) {
    std::size_t released = 0;
    for (const auto& v : vs) {
        auto it = by_digest_.find(v->digest());
        if (it == by_digest_.end() || it->second.ordered) continue;
        it->second.ordered = true;
        released += v->size();
    }
    uncommitted_bytes_ -= released;
    return released;
}

}  // namespace lifefin
