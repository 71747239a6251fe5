#pragma once

// Little-endian binary encoding shared by the dataset cache and the model
// and policy checkpoints.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlsel/numkit.hpp"

namespace rlsel::binio {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::span<const unsigned char> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void f64s(std::span<const double> v) {
        for (double x : v) f64(x);
    }
    void matrix(const numkit::Matrix& m) { f64s(m.data()); }

    /// Appends the FNV-1a checksum of everything written so far.
    void seal() { u64(numkit::fnv1a64(buf_)); }

    const std::vector<unsigned char>& buffer() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const unsigned char> b) : b_(b) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    void f64s(std::span<double> out) {
        for (double& x : out) x = f64();
    }
    std::span<const unsigned char> bytes(std::size_t n) {
        need(n);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return b_.size() - pos_; }

    /// Verifies a trailing checksum covering every byte before it.
    void verify_seal() {
        if (b_.size() < 8) throw FormatError("truncated file: no checksum");
        const auto body = b_.first(b_.size() - 8);
        Reader tail(b_.last(8));
        if (tail.u64() != numkit::fnv1a64(body)) throw FormatError("checksum mismatch: file is corrupted");
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw FormatError("truncated file");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const unsigned char> b_;
    std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const unsigned char> bytes);

}  // namespace rlsel::binio
