#pragma once

#include <lifefin/dag_store.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace testkit {

using namespace lifefin;

// splitmix64; tests never touch std random engines so sequences are pinned.
struct Rng {
    std::uint64_t s;
    explicit Rng(std::uint64_t seed) : s(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    std::uint64_t below(std::uint64_t k) { return k ? next() % k : 0; }
    bool chance(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }
};

struct DagShape {
    std::uint32_t n = 4, f = 1;
    Round rounds = 8;
    double absent = 0.15;       // chance a creator skips a round (never below quorum)
    double extra_ref = 0.5;     // chance to reference each non-mandatory parent
    double equivocate = 0.0;    // chance the equivocator also emits a twin
    std::optional<NodeId> equivocator;  // unset: any creator may
};

// Random DAG in insertion order (round ascending). Every vertex references at
// least 2f+1 distinct creators of the previous round.
inline std::vector<VertexPtr> random_dag(Rng& rng, const DagShape& shape) {
    std::vector<VertexPtr> out;
    std::vector<VertexPtr> prev;
    const std::uint32_t q = 2 * shape.f + 1;
    for (NodeId c = 0; c < shape.n; ++c) {
        out.push_back(Vertex::genesis(c));
        prev.push_back(out.back());
    }
    for (Round r = 2; r <= shape.rounds; ++r) {
        std::vector<NodeId> present;
        for (NodeId c = 0; c < shape.n; ++c)
            if (!rng.chance(shape.absent)) present.push_back(c);
        while (present.size() < q) {
            NodeId c = static_cast<NodeId>(rng.below(shape.n));
            if (std::find(present.begin(), present.end(), c) == present.end()) present.push_back(c);
        }
        std::sort(present.begin(), present.end());
        // one parent per creator (twins are picked at random)
        std::map<NodeId, std::vector<VertexPtr>> parents;
        for (const auto& p : prev) parents[p->creator()].push_back(p);
        std::vector<VertexPtr> cur;
        for (NodeId c : present) {
            const bool may = !shape.equivocator || *shape.equivocator == c;
            const int copies = may && rng.chance(shape.equivocate) ? 2 : 1;
            for (int k = 0; k < copies; ++k) {
                std::vector<NodeId> pcs;
                for (const auto& [pc, _] : parents) pcs.push_back(pc);
                rng.shuffle(pcs);
                std::vector<VertexRef> refs;
                for (std::size_t i = 0; i < pcs.size(); ++i) {
                    if (i >= q && !rng.chance(shape.extra_ref)) continue;
                    const auto& opts = parents[pcs[i]];
                    refs.push_back(opts[rng.below(opts.size())]->ref());
                }
                Bytes payload{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(c),
                              static_cast<std::uint8_t>(k)};
                cur.push_back(Vertex::make(r, c, std::move(payload), std::move(refs)));
            }
        }
        out.insert(out.end(), cur.begin(), cur.end());
        prev = std::move(cur);
    }
    return out;
}

// Reachability over an explicit vertex list as a dense matrix, filled in one
// pass in round order (parents always sit in lower rounds).
struct Closure {
    std::map<Digest, std::size_t> index;
    std::vector<VertexPtr> vs;
    std::vector<std::vector<bool>> reach;  // reach[a][b]: path a -> b (reflexive)

    explicit Closure(const std::vector<VertexPtr>& all) : vs(all) {
        std::stable_sort(vs.begin(), vs.end(),
                         [](const VertexPtr& a, const VertexPtr& b) { return a->round() < b->round(); });
        for (std::size_t i = 0; i < vs.size(); ++i) index[vs[i]->digest()] = i;
        const std::size_t m = vs.size();
        reach.assign(m, std::vector<bool>(m, false));
        for (std::size_t i = 0; i < m; ++i) {
            reach[i][i] = true;
            for (const auto& ref : vs[i]->refs()) {
                auto it = index.find(ref.digest);
                if (it == index.end()) continue;
                const auto& up = reach[it->second];
                for (std::size_t j = 0; j < m; ++j)
                    if (up[j]) reach[i][j] = true;
            }
        }
    }
    bool path(const Digest& from, const Digest& to) const {
        auto a = index.find(from), b = index.find(to);
        if (a == index.end() || b == index.end()) return false;
        return reach[a->second][b->second];
    }
    std::vector<VertexPtr> ancestors(const Digest& root) const {
        std::vector<VertexPtr> out;
        auto it = index.find(root);
        if (it == index.end()) return out;
        for (std::size_t j = 0; j < vs.size(); ++j)
            if (reach[it->second][j]) out.push_back(vs[j]);
        return out;
    }
};

}  // namespace testkit
