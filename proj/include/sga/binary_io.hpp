#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "sga/errors.hpp"

namespace sga::io {

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatError::Kind::io, "failed writing '" + path.string() + "'");
}

/// Little-endian byte sink backed by a growable buffer.
class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& buffer() const noexcept { return buf_; }

    void write_file(const std::filesystem::path& path) const { write_bytes(path, buf_); }

private:
    std::vector<char> buf_;
};

/// Little-endian reader over an in-memory file image. Every read is
/// bounds-checked and reports truncation with the field being read.
class ByteReader {
public:
    explicit ByteReader(std::vector<char> buf, std::string origin = {})
        : buf_(std::move(buf)), origin_(std::move(origin)) {}

    static ByteReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for reading");
        std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(buf), path.string());
    }

    void expect_magic(std::string_view magic) {
        need(magic.size(), "magic");
        if (std::string_view(buf_.data() + pos_, magic.size()) != magic) {
            throw FormatError(FormatError::Kind::bad_magic,
                              where() + "bad magic bytes, expected \"" + std::string(magic) + "\"");
        }
        pos_ += magic.size();
    }

    std::uint8_t u8(const char* field) {
        need(1, field);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }

    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    double f64(const char* field) { return std::bit_cast<double>(u64(field)); }

    std::size_t remaining() const noexcept { return buf_.size() - pos_; }

    void expect_end() const {
        if (remaining() != 0) {
            throw FormatError(FormatError::Kind::corrupt,
                              where() + std::to_string(remaining()) + " trailing bytes after payload");
        }
    }

    std::string where() const { return origin_.empty() ? std::string{} : origin_ + ": "; }

private:
    void need(std::size_t n, const char* field) const {
        if (buf_.size() - pos_ < n) {
            throw FormatError(FormatError::Kind::truncated,
                              where() + "file truncated while reading " + field);
        }
    }

    std::vector<char> buf_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace sga::io
