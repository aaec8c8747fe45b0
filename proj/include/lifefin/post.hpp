#pragma once

#include <lifefin/crypto.hpp>
#include <lifefin/simnet.hpp>
#include <lifefin/vertex.hpp>

#include <optional>

namespace lifefin {

// Proof-of-stuck block: the creator's last vertex, stamped with its fallback view.
struct PoSTBlock {
    std::uint64_t view = 0;
    VertexPtr vertex;
    NodeId creator = 0;
    std::optional<QuorumCertificate> cert;

    // Digest signed by voters; excludes the certificate.
    Digest sign_digest() const;
    Bytes serialize() const;
    std::size_t size() const;
    static std::optional<PoSTBlock> parse(const Bytes& b);
};
using PoSTPtr = std::shared_ptr<const PoSTBlock>;

enum class PostValidity { valid, view_mismatch, duplicate, stale_vertex, malformed };
const char* to_string(PostValidity v);

struct PostMessage final : Message {
    PoSTPtr post;
    MsgClass cls() const override { return MsgClass::fallback; }
    const char* kind() const override { return "post"; }
    std::size_t size() const override { return post->size(); }
    std::uint64_t tag() const override { return tag_of(post->sign_digest()); }
};

struct PostVoteMessage final : Message {
    std::uint64_t view = 0;
    Signature sig;
    MsgClass cls() const override { return MsgClass::fallback; }
    const char* kind() const override { return "post-vote"; }
    std::size_t size() const override { return 80; }
    std::uint64_t tag() const override { return tag_of(sig.msg) ^ sig.signer; }
};

}  // namespace lifefin
