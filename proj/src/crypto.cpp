#include <lifefin/crypto.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <stdexcept>

namespace lifefin {

Digest sha256(const std::uint8_t* data, std::size_t len) {
    Digest out{};
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    return out;
}

Digest sha256(std::string_view s) {
    return sha256(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

Sha256Stream::Sha256Stream() : ctx_(EVP_MD_CTX_new()) {
    EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Sha256Stream::~Sha256Stream() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256Stream::update(const std::uint8_t* p, std::size_t n) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), p, n);
}

Digest Sha256Stream::finish() {
    Digest out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len);
    return out;
}

KeyRing::KeyRing(std::uint64_t system_seed, std::uint32_t n) {
    secrets_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Writer w;
        w.u64(0x6b6579u);
        w.u64(system_seed);
        w.u32(i);
        secrets_.push_back(sha256(w.bytes()));
    }
}

Signature KeyRing::sign(NodeId signer, const Digest& msg) const {
    Writer w;
    w.digest(secrets_.at(signer));
    w.digest(msg);
    return Signature{signer, msg, sha256(w.bytes())};
}

bool KeyRing::verify(const Signature& s) const {
    if (s.signer >= secrets_.size()) return false;
    return sign(s.signer, s.msg).tag == s.tag;
}

std::set<NodeId> QuorumCertificate::signers() const {
    std::set<NodeId> out;
    for (const auto& s : sigs) out.insert(s.signer);
    return out;
}

void QuorumCertificate::encode(Writer& w) const {
    w.digest(msg);
    w.u32(static_cast<std::uint32_t>(sigs.size()));
    for (const auto& s : sigs) {
        w.u32(s.signer);
        w.digest(s.tag);
    }
}

bool QuorumCertificate::decode(Reader& r, QuorumCertificate& out) {
    std::uint32_t count = 0;
    if (!r.digest(out.msg) || !r.u32(count) || count > 4096) return false;
    out.sigs.clear();
    for (std::uint32_t i = 0; i < count; ++i) {
        Signature s;
        s.msg = out.msg;
        if (!r.u32(s.signer) || !r.digest(s.tag)) return false;
        out.sigs.push_back(s);
    }
    return true;
}

const char* to_string(CertError e) {
    switch (e) {
        case CertError::too_few_signers: return "too_few_signers";
        case CertError::duplicate_signer: return "duplicate_signer";
        case CertError::digest_mismatch: return "digest_mismatch";
        case CertError::bad_signature: return "bad_signature";
    }
    return "?";
}

CertResult form_certificate(const std::vector<Signature>& sigs, std::uint32_t quorum,
                            const KeyRing* keys) {
    if (sigs.empty()) return CertError::too_few_signers;
    const Digest& msg = sigs.front().msg;
    std::set<NodeId> seen;
    for (const auto& s : sigs) {
        if (s.msg != msg) return CertError::digest_mismatch;
        if (!seen.insert(s.signer).second) return CertError::duplicate_signer;
        if (keys && !keys->verify(s)) return CertError::bad_signature;
    }
    if (seen.size() < quorum) return CertError::too_few_signers;
    QuorumCertificate qc;
    qc.msg = msg;
    qc.sigs = sigs;
    std::sort(qc.sigs.begin(), qc.sigs.end(),
              [](const Signature& a, const Signature& b) { return a.signer < b.signer; });
    return qc;
}

bool verify_certificate(const QuorumCertificate& qc, const Digest& expected,
                        std::uint32_t quorum, const KeyRing& keys) {
    if (qc.msg != expected) return false;
    std::set<NodeId> seen;
    for (const auto& s : qc.sigs) {
        if (s.msg != expected || !seen.insert(s.signer).second) return false;
        if (!keys.verify(s)) return false;
    }
    return seen.size() >= quorum;
}

}  // namespace lifefin
