#include <lifefin/vertex.hpp>

#include <algorithm>

namespace lifefin {

Digest no_vote_digest(Round r) {
    Writer w;
    w.blob(reinterpret_cast<const std::uint8_t*>("no-vote"), 7);
    w.u64(r);
    return sha256(w.bytes());
}

bool Vertex::references(const Digest& d) const {
    for (const auto& ref : refs_)
        if (ref.digest == d) return true;
    return false;
}

bool Vertex::references_slot(Round r, NodeId creator) const {
    for (const auto& ref : refs_)
        if (ref.round == r && ref.creator == creator) return true;
    return false;
}

// Field order: round, creator, payload, sorted refs, aux.
void Vertex::encode(Writer& w) const {
    w.u64(round_);
    w.u32(creator_);
    w.blob(*payload_);
    w.u32(static_cast<std::uint32_t>(refs_.size()));
    for (const auto& ref : refs_) {
        w.u64(ref.round);
        w.u32(ref.creator);
        w.digest(ref.digest);
    }
    if (aux_) {
        w.u8(1);
        w.u64(aux_->round);
        aux_->qc.encode(w);
    } else {
        w.u8(0);
    }
}

Bytes Vertex::serialize() const {
    Writer w;
    encode(w);
    return w.take();
}

VertexPtr Vertex::make(Round round, NodeId creator, std::shared_ptr<const Bytes> payload,
                       std::vector<VertexRef> refs, std::optional<NoVoteCertificate> aux) {
    auto v = std::make_shared<Vertex>();
    v->round_ = round;
    v->creator_ = creator;
    v->payload_ = payload ? std::move(payload) : std::make_shared<const Bytes>();
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    v->refs_ = std::move(refs);
    v->aux_ = std::move(aux);
    Writer w;
    v->encode(w);
    v->size_ = w.size();
    v->digest_ = sha256(w.bytes());
    return v;
}

VertexPtr Vertex::make(Round round, NodeId creator, Bytes payload, std::vector<VertexRef> refs,
                       std::optional<NoVoteCertificate> aux) {
    return make(round, creator, std::make_shared<const Bytes>(std::move(payload)), std::move(refs),
                std::move(aux));
}

VertexPtr Vertex::genesis(NodeId creator) { return make(1, creator, Bytes{}, {}); }

VertexPtr Vertex::decode(Reader& r) {
    Round round = 0;
    std::uint32_t creator = 0, nrefs = 0;
    Bytes payload;
    if (!r.u64(round) || !r.u32(creator) || !r.blob(payload) || !r.u32(nrefs)) return nullptr;
    if (nrefs > 4096) return nullptr;
    std::vector<VertexRef> refs(nrefs);
    for (auto& ref : refs) {
        std::uint32_t c = 0;
        if (!r.u64(ref.round) || !r.u32(c) || !r.digest(ref.digest)) return nullptr;
        ref.creator = c;
    }
    std::uint8_t has_aux = 0;
    if (!r.u8(has_aux) || has_aux > 1) return nullptr;
    std::optional<NoVoteCertificate> aux;
    if (has_aux) {
        NoVoteCertificate nvc;
        if (!r.u64(nvc.round) || !QuorumCertificate::decode(r, nvc.qc)) return nullptr;
        aux = std::move(nvc);
    }
    // Non-canonical reference order would change the digest; reject it.
    if (!std::is_sorted(refs.begin(), refs.end())) return nullptr;
    return make(round, creator, std::move(payload), std::move(refs), std::move(aux));
}

VertexPtr Vertex::parse(const Bytes& b) {
    Reader r(b);
    auto v = decode(r);
    if (!v || !r.done()) return nullptr;
    return v;
}

}  // namespace lifefin
