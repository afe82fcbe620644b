#include "kcd/binio.hpp"

#include <cstdio>

#include <zlib.h>

namespace kcd {

void ByteWriter::str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    bytes(s.data(), s.size());
}

std::uint32_t ByteWriter::crc() const {
    uLong c = crc32(0L, Z_NULL, 0);
    c = crc32(c, buf_.data(), uInt(buf_.size()));
    return std::uint32_t(c);
}

void ByteWriter::write_file_with_crc(const std::string& path) {
    const std::uint32_t c = crc();
    u32(c);
    write_file_bytes(path, buf_.data(), buf_.size());
}

ByteReader ByteReader::from_file_with_crc(const std::string& path, const char* what) {
    std::vector<std::uint8_t> data = read_file_bytes(path);
    if (data.size() < 4) throw IoError(std::string(what) + ": file too short: " + path);
    std::uint32_t stored = 0;
    for (unsigned i = 0; i < 4; ++i)
        stored |= std::uint32_t(data[data.size() - 4 + i]) << (8 * i);
    data.resize(data.size() - 4);
    uLong c = crc32(0L, Z_NULL, 0);
    c = crc32(c, data.data(), uInt(data.size()));
    if (std::uint32_t(c) != stored)
        throw IoError(std::string(what) + ": checksum mismatch (corrupt file): " + path);
    return ByteReader(std::move(data));
}

std::string ByteReader::str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
}

void ByteReader::bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
}

void ByteReader::expect_magic(const char (&m)[9], const char* what) {
    char got[8];
    bytes(got, 8);
    if (std::memcmp(got, m, 8) != 0)
        throw IoError(std::string(what) + ": bad magic (not a " + what + " file)");
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open file for reading: " + path);
    std::fseek(f, 0, SEEK_END);
    const long sz = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<std::uint8_t> data(sz > 0 ? std::size_t(sz) : 0);
    if (!data.empty() && std::fread(data.data(), 1, data.size(), f) != data.size()) {
        std::fclose(f);
        throw IoError("short read: " + path);
    }
    std::fclose(f);
    return data;
}

void write_file_bytes(const std::string& path, const void* data, std::size_t n) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open file for writing: " + path);
    if (n && std::fwrite(data, 1, n, f) != n) {
        std::fclose(f);
        throw IoError("short write: " + path);
    }
    if (std::fclose(f) != 0) throw IoError("close failed: " + path);
}

} // namespace kcd
