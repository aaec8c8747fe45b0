#pragma once

#include <lifefin/bytes.hpp>
#include <lifefin/crypto.hpp>

#include <memory>
#include <optional>
#include <tuple>
#include <vector>

namespace lifefin {

struct VertexRef {
    Round round = 0;
    NodeId creator = 0;
    Digest digest{};

    auto key() const { return std::tie(round, creator, digest); }
    bool operator==(const VertexRef& o) const { return key() == o.key(); }
    bool operator<(const VertexRef& o) const { return key() < o.key(); }
};

// 2f+1 signed no-votes for one round's leader.
struct NoVoteCertificate {
    Round round = 0;
    QuorumCertificate qc;
    bool operator==(const NoVoteCertificate&) const = default;
};

Digest no_vote_digest(Round r);

class Vertex;
using VertexPtr = std::shared_ptr<const Vertex>;

class Vertex {
public:
    Round round() const { return round_; }
    NodeId creator() const { return creator_; }
    const Bytes& payload() const { return *payload_; }
    const std::shared_ptr<const Bytes>& payload_ptr() const { return payload_; }
    const std::vector<VertexRef>& refs() const { return refs_; }  // sorted
    const std::optional<NoVoteCertificate>& aux() const { return aux_; }
    const Digest& digest() const { return digest_; }
    std::size_t size() const { return size_; }  // serialized byte length
    VertexRef ref() const { return VertexRef{round_, creator_, digest_}; }
    bool references(const Digest& d) const;
    bool references_slot(Round r, NodeId creator) const;

    void encode(Writer& w) const;
    Bytes serialize() const;

    static VertexPtr make(Round round, NodeId creator, std::shared_ptr<const Bytes> payload,
                          std::vector<VertexRef> refs,
                          std::optional<NoVoteCertificate> aux = std::nullopt);
    static VertexPtr make(Round round, NodeId creator, Bytes payload, std::vector<VertexRef> refs,
                          std::optional<NoVoteCertificate> aux = std::nullopt);
    static VertexPtr genesis(NodeId creator);
    // Returns null on malformed input.
    static VertexPtr decode(Reader& r);
    static VertexPtr parse(const Bytes& b);

private:
    Round round_ = 0;
    NodeId creator_ = 0;
    std::shared_ptr<const Bytes> payload_;
    std::vector<VertexRef> refs_;
    std::optional<NoVoteCertificate> aux_;
    Digest digest_{};
    std::size_t size_ = 0;
};

}  // namespace lifefin
