#include <lifefin/bytes.hpp>

#include <cstring>

namespace lifefin {

std::string to_hex(const std::uint8_t* data, std::size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.resize(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xf];
    }
    return out;
}

std::string short_hex(const Digest& d) { return to_hex(d.data(), 8); }

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

bool Reader::u8(std::uint8_t& v) {
    if (n_ - off_ < 1) return false;
    v = p_[off_++];
    return true;
}

bool Reader::u32(std::uint32_t& v) {
    if (n_ - off_ < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[off_ + i]) << (8 * i);
    off_ += 4;
    return true;
}

bool Reader::u64(std::uint64_t& v) {
    if (n_ - off_ < 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[off_ + i]) << (8 * i);
    off_ += 8;
    return true;
}

bool Reader::digest(Digest& d) {
    if (n_ - off_ < d.size()) return false;
    std::memcpy(d.data(), p_ + off_, d.size());
    off_ += d.size();
    return true;
}

bool Reader::blob(Bytes& out, std::size_t max_len) {
    std::uint32_t len = 0;
    if (!u32(len)) return false;
    if (len > max_len || n_ - off_ < len) return false;
    out.assign(p_ + off_, p_ + off_ + len);
    off_ += len;
    return true;
}

}  // namespace lifefin
