#pragma once

#include <lifefin/vertex.hpp>
#include <lifefin/simnet.hpp>

#include <vector>

namespace lifefin {

// Best-effort vertex dissemination (uncertified engine).
struct VertexMessage final : Message {
    VertexPtr vertex;
    MsgClass cls() const override { return MsgClass::dag; }
    const char* kind() const override { return "vertex"; }
    std::size_t size() const override { return 8 + vertex->size(); }
    std::uint64_t tag() const override { return tag_of(vertex->digest()); }
};

struct SyncRequest final : Message {
    MsgClass klass = MsgClass::dag;
    std::vector<Digest> wanted;
    MsgClass cls() const override { return klass; }
    const char* kind() const override { return "sync-req"; }
    std::size_t size() const override { return 8 + 32 * wanted.size(); }
    std::uint64_t tag() const override { return wanted.empty() ? 0 : tag_of(wanted.front()); }
};

struct SyncReply final : Message {
    MsgClass klass = MsgClass::dag;
    std::vector<VertexPtr> vertices;
    MsgClass cls() const override { return klass; }
    const char* kind() const override { return "sync-reply"; }
    std::size_t size() const override {
        std::size_t s = 8;
        for (const auto& v : vertices) s += v->size();
        return s;
    }
    std::uint64_t tag() const override { return vertices.empty() ? 0 : tag_of(vertices.front()->digest()); }
};

struct NoVoteMessage final : Message {
    Round round = 0;
    Signature sig;
    MsgClass cls() const override { return MsgClass::dag; }
    const char* kind() const override { return "no-vote"; }
    std::size_t size() const override { return 80; }
    std::uint64_t tag() const override { return (round << 8) ^ sig.signer; }
};

}  // namespace lifefin
