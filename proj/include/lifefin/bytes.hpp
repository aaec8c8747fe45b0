#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifefin {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using NodeId = std::uint32_t;
using Round = std::uint64_t;
using SimTime = std::int64_t;  // simulated milliseconds

std::string to_hex(const std::uint8_t* data, std::size_t len);
inline std::string to_hex(const Digest& d) { return to_hex(d.data(), d.size()); }
std::string short_hex(const Digest& d);  // first 8 bytes

struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept {
        std::size_t h = 0;
        for (int i = 0; i < 8; ++i) h = (h << 8) | d[i];
        return h;
    }
};

// Little-endian, length-prefixed encoder used for digests and size accounting.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void raw(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    void digest(const Digest& d) { raw(d.data(), d.size()); }
    void blob(const Bytes& b) {
        u32(static_cast<std::uint32_t>(b.size()));
        raw(b.data(), b.size());
    }
    void blob(const std::uint8_t* p, std::size_t n) {
        u32(static_cast<std::uint32_t>(n));
        raw(p, n);
    }
    Bytes& bytes() { return buf_; }
    Bytes take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    Bytes buf_;
};

// Bounds-checked decoder. Every accessor returns false once the input runs short.
class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
    explicit Reader(const Bytes& b) : p_(b.data()), n_(b.size()) {}

    bool u8(std::uint8_t& v);
    bool u32(std::uint32_t& v);
    bool u64(std::uint64_t& v);
    bool digest(Digest& d);
    bool blob(Bytes& out, std::size_t max_len = 1u << 26);
    bool done() const { return off_ == n_; }

private:
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t off_ = 0;
};

}  // namespace lifefin
