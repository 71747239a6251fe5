#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlsel {

/// Raised when a caller breaks an operation's documented precondition
/// (shape mismatch, empty input, out-of-range argument).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace numkit {

/// Dense row-major matrix of doubles. Plain value type.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Matrix transpose() const;
    /// Rows selected by index, in the given order.
    Matrix gather_rows(std::span<const std::size_t> idx) const;

    bool all_finite() const;
    double frobenius_norm() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Row-major product, accumulated left to right over the inner index.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose.
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// Softmax with max-subtraction. Throws ContractViolation on empty input.
std::vector<double> stable_softmax(std::span<const double> logits);
/// log(sum(exp(x))) computed without overflow.
double log_sum_exp(std::span<const double> logits);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double l2_distance(std::span<const double> a, std::span<const double> b);

/// n x n Euclidean distance matrix between the rows of `a`. Each unordered
/// pair is computed once and mirrored, so the result is exactly symmetric
/// with an exact zero diagonal.
Matrix pairwise_l2(const Matrix& a);

/// Largest singular value via power iteration on a^T a.
double spectral_norm(const Matrix& a, int max_iter = 500, double tol = 1e-13);

/// Seeded generator: xoshiro256** with its state expanded from the 64-bit
/// seed by splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal by the Box-Muller transform; the second variate of
    /// each pair is cached.
    double normal();
    double normal(double mean, double stddev);
    /// Uniform integer in [0, n) by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p);

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Per-purpose sub-seed: root XOR a fixed constant, then one splitmix64 round.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t purpose);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace numkit
}  // namespace rlsel
