#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "kcd/error.hpp"

namespace kcd {

/// Little-endian buffer writer. Content is assembled in memory and flushed
/// to disk in one call so a CRC over the whole payload can be appended.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void i32(std::int32_t v) { put_le(std::uint32_t(v)); }
    void i64(std::int64_t v) { put_le(std::uint64_t(v)); }
    void f32(float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        put_le(u);
    }
    void f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        put_le(u);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s);                     // u32 length + bytes
    void magic(const char (&m)[9]) { bytes(m, 8); }     // 8-byte tag

    void f32_array(const float* p, std::size_t n) { bytes(p, n * 4); }
    void f64_array(const double* p, std::size_t n) { bytes(p, n * 8); }

    std::size_t size() const { return buf_.size(); }
    const std::vector<std::uint8_t>& buffer() const { return buf_; }

    std::uint32_t crc() const;

    /// Appends crc() and writes the buffer to path (throws IoError).
    void write_file_with_crc(const std::string& path);

private:
    template <typename U>
    void put_le(U v) {
        for (unsigned i = 0; i < sizeof(U); ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader over an in-memory file image.
class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}

    /// Reads the whole file; verifies and strips a trailing CRC32.
    static ByteReader from_file_with_crc(const std::string& path, const char* what);

    std::uint8_t u8() { return take<std::uint8_t>(); }
    std::uint16_t u16() { return take<std::uint16_t>(); }
    std::uint32_t u32() { return take<std::uint32_t>(); }
    std::uint64_t u64() { return take<std::uint64_t>(); }
    std::int32_t i32() { return std::int32_t(take<std::uint32_t>()); }
    std::int64_t i64() { return std::int64_t(take<std::uint64_t>()); }
    float f32() {
        const std::uint32_t u = take<std::uint32_t>();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    double f64() {
        const std::uint64_t u = take<std::uint64_t>();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string str();
    void bytes(void* p, std::size_t n);
    void expect_magic(const char (&m)[9], const char* what);

    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    template <typename U>
    U take() {
        need(sizeof(U));
        U v = 0;
        for (unsigned i = 0; i < sizeof(U); ++i) v |= U(buf_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw IoError("truncated file: unexpected end of data");
    }
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, std::size_t n);

} // namespace kcd
