#include <lifefin/post.hpp>

namespace lifefin {

const char* to_string(PostValidity v) {
    switch (v) {
        case PostValidity::valid: return "valid";
        case PostValidity::view_mismatch: return "view_mismatch";
        case PostValidity::duplicate: return "duplicate";
        case PostValidity::stale_vertex: return "stale_vertex";
        case PostValidity::malformed: return "malformed";
    }
    return "?";
}

Digest PoSTBlock::sign_digest() const {
    Writer w;
    w.blob(reinterpret_cast<const std::uint8_t*>("post"), 4);
    w.u64(view);
    w.digest(vertex->digest());
    w.u32(creator);
    return sha256(w.bytes());
}

Bytes PoSTBlock::serialize() const {
    Writer w;
    w.u64(view);
    vertex->encode(w);
    w.u32(creator);
    if (cert) {
        w.u8(1);
        cert->encode(w);
    } else {
        w.u8(0);
    }
    return w.take();
}

std::size_t PoSTBlock::size() const {
    return 8 + vertex->size() + 4 + 1 + (cert ? 36 + 36 * cert->sigs.size() : 0);
}

std::optional<PoSTBlock> PoSTBlock::parse(const Bytes& b) {
    Reader r(b);
    PoSTBlock p;
    if (!r.u64(p.view)) return std::nullopt;
    p.vertex = Vertex::decode(r);
    std::uint8_t has_cert = 0;
    if (!p.vertex || !r.u32(p.creator) || !r.u8(has_cert) || has_cert > 1) return std::nullopt;
    if (has_cert) {
        QuorumCertificate qc;
        if (!QuorumCertificate::decode(r, qc)) return std::nullopt;
        p.cert = std::move(qc);
    }
    if (!r.done()) return std::nullopt;
    return p;
}

}  // namespace lifefin
