#pragma once

#include <lifefin/bytes.hpp>

#include <set>
#include <string>
#include <variant>
#include <vector>

namespace lifefin {

Digest sha256(const std::uint8_t* data, std::size_t len);
inline Digest sha256(const Bytes& b) { return sha256(b.data(), b.size()); }
Digest sha256(std::string_view s);

// Incremental hasher, used for trace hashes.
class Sha256Stream {
public:
    Sha256Stream();
    ~Sha256Stream();
    Sha256Stream(const Sha256Stream&) = delete;
    Sha256Stream& operator=(const Sha256Stream&) = delete;
    void update(const std::uint8_t* p, std::size_t n);
    void update(std::string_view s) { update(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()); }
    Digest finish();

private:
    void* ctx_;
};

// Deterministic keyed-digest test scheme: tag = H(secret_i || msg).
// The simulator hands each node only its own key, so nobody forges another
// node's tag through the node API.
struct Signature {
    NodeId signer = 0;
    Digest msg{};
    Digest tag{};
    bool operator==(const Signature&) const = default;
};

class KeyRing {
public:
    KeyRing(std::uint64_t system_seed, std::uint32_t n);
    Signature sign(NodeId signer, const Digest& msg) const;
    bool verify(const Signature& s) const;
    std::uint32_t size() const { return static_cast<std::uint32_t>(secrets_.size()); }

private:
    std::vector<Digest> secrets_;
};

struct QuorumCertificate {
    Digest msg{};
    std::vector<Signature> sigs;  // sorted by signer
    std::set<NodeId> signers() const;
    void encode(Writer& w) const;
    static bool decode(Reader& r, QuorumCertificate& out);
    bool operator==(const QuorumCertificate&) const = default;
};

enum class CertError { too_few_signers, duplicate_signer, digest_mismatch, bad_signature };
const char* to_string(CertError e);

using CertResult = std::variant<QuorumCertificate, CertError>;

// Builds a certificate from exactly-quorum-or-more distinct signatures over one digest.
CertResult form_certificate(const std::vector<Signature>& sigs, std::uint32_t quorum,
                            const KeyRing* keys = nullptr);

// Checks signer count, distinctness, digest binding and each tag.
bool verify_certificate(const QuorumCertificate& qc, const Digest& expected,
                        std::uint32_t quorum, const KeyRing& keys);

}  // namespace lifefin
