#pragma once

#include <cstdint>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace razcert {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small sizes only (network layers, coupling gains).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// Axis-aligned box given by per-coordinate closed intervals.
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {}

    static Box centered(std::size_t dim, double half_width) {
        return Box(Vec(dim, -half_width), Vec(dim, half_width));
    }
    static Box point(Vec v) { return Box(v, v); }

    std::size_t dim() const { return lo.size(); }
    double width(std::size_t q) const { return hi[q] - lo[q]; }
    bool contains(std::span<const double> x, double tol = 0.0) const {
        for (std::size_t q = 0; q < lo.size(); ++q)
            if (x[q] < lo[q] - tol || x[q] > hi[q] + tol) return false;
        return true;
    }
    void clip(Vec& x) const {
        for (std::size_t q = 0; q < lo.size(); ++q) {
            if (x[q] < lo[q]) x[q] = lo[q];
            if (x[q] > hi[q]) x[q] = hi[q];
        }
    }
    /// Coordinate-wise hull of this box and another.
    void expand(const Box& o) {
        for (std::size_t q = 0; q < lo.size(); ++q) {
            lo[q] = std::min(lo[q], o.lo[q]);
            hi[q] = std::max(hi[q], o.hi[q]);
        }
    }
    void append(const Box& o) {
        lo.insert(lo.end(), o.lo.begin(), o.lo.end());
        hi.insert(hi.end(), o.hi.begin(), o.hi.end());
    }
    double max_norm2() const {
        double s = 0.0;
        for (std::size_t q = 0; q < lo.size(); ++q) {
            double m = std::max(std::abs(lo[q]), std::abs(hi[q]));
            s += m * m;
        }
        return std::sqrt(s);
    }
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : std::runtime_error {
    DimensionError(const std::string& where, const std::string& field, std::size_t expected,
                   std::size_t got)
        : std::runtime_error(where + ": field '" + field + "' expected dimension " +
                             std::to_string(expected) + ", got " + std::to_string(got)) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

// --- deterministic RNG -------------------------------------------------------
//
// All randomness in the project flows from one root seed. Streams are derived
// with derive_seed(root, tag, index); the generator itself is splitmix64, so
// results are identical across platforms and thread counts.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag, std::uint64_t index) {
    std::uint64_t s = root ^ fnv1a(tag) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    // one mixing round so nearby indices decorrelate
    return splitmix64(s);
}

struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() { return splitmix64(state); }

    /// Uniform double in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Vec uniform_in(const Box& box) {
        Vec x(box.dim());
        for (std::size_t q = 0; q < x.size(); ++q) x[q] = uniform(box.lo[q], box.hi[q]);
        return x;
    }

    /// Standard normal via Box-Muller (deterministic pairing).
    double normal() {
        double u1 = std::max(uniform(), 1e-300);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

}  // namespace razcert
