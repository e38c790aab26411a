#ifndef DIFFPURIFY_STATE_HPP
#define DIFFPURIFY_STATE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffpurify {

// Flat real vector. The universal sample type: states, estimates, images,
// perturbations all use it; grid structure is carried separately.
using State = std::vector<double>;

struct GridShape {
    int height = 0;
    int width = 0;
    int channels = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
};

inline void check_same_dim(const State& a, const State& b, const char* where) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

inline bool all_finite(const State& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double dot(const State& a, const State& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l1_norm(const State& x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

inline double l2_norm(const State& x) { return std::sqrt(dot(x, x)); }

inline double linf_norm(const State& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

// y += a*x
inline void axpy(double a, const State& x, State& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline State operator-(const State& a, const State& b) {
    State out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline State operator+(const State& a, const State& b) {
    State out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline State scaled(const State& x, double a) {
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
    return out;
}

// Seeded RNG stream. Substreams derive from a root seed with splitmix64 over
// (root, tag hash, index); the rule is fixed so paired runs can share draws.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    double gaussian() { return normal_(engine_); }

    State gaussian_vec(std::size_t n) {
        State out(n);
        for (auto& v : out) v = normal_(engine_);
        return out;
    }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    std::uint64_t uniform_index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed splitting rule: stream(root, tag, k) = splitmix64(root ^ fnv1a(tag) ^ splitmix64(k)).
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag, std::uint64_t index = 0) {
    return splitmix64(root ^ fnv1a64(tag) ^ splitmix64(index));
}

}  // namespace diffpurify

#endif
