#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "ak/error.hpp"

// Little-endian encode/decode for the project's binary file formats.
namespace ak::detail {

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + path.string() + " for writing");
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw Error("write failed for " + path.string());
    }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::filesystem::path& path) : name_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open " + name_);
        data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void expect_magic(std::string_view magic) {
        need(magic.size(), "magic");
        if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
            throw FormatError(name_ + ": bad magic, expected '" + std::string(magic) + "'", pos_);
        }
        pos_ += magic.size();
    }
    std::uint8_t u8() {
        need(1, "u8");
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
    std::uint64_t u64() { return get(8, "u64"); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        need(n, "string");
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    const std::string& name() const noexcept { return name_; }

    void expect_end() const {
        if (pos_ != data_.size()) throw FormatError(name_ + ": trailing bytes", pos_);
    }
    // Throws unless `n` more bytes are available.
    void need(std::size_t n, std::string_view what) const {
        if (data_.size() - pos_ < n) {
            throw FormatError(name_ + ": truncated while reading " + std::string(what), pos_);
        }
    }

private:
    std::uint64_t get(int n, std::string_view what) {
        need(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string name_;
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

}  // namespace ak::detail
