#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace salsa {

// Error taxonomy mirrored by the CLI exit codes.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64 finalizer. Used both for seeding RNG streams and as the frozen
// mixing function behind fingerprint hashing, so bit patterns are stable
// across platforms and releases.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

// FNV-1a over bytes; used for file checksums and config hashes.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic RNG stream. xoshiro-style state evolved with splitmix64 steps;
// transforms (u01, normal, index sampling) are implemented by hand so that a
// given (seed, stream) pair yields identical draws on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix64(seed, stream)) {
        // Warm up so that nearby seeds decorrelate.
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n) {
        if (n == 0) throw NumericError("Rng::index: empty range");
        auto i = static_cast<std::size_t>(u01() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    // Standard normal via Box-Muller; spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = u01();
        double u2 = u01();
        while (u1 <= 1e-300) u1 = u01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Draw an index from a discrete distribution given as weights (need not
    // be normalized; total must be positive).
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) throw NumericError("Rng::categorical: zero total weight");
        double x = u01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (x < acc) return i;
        }
        return weights.size() - 1;
    }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Summation with a fixed pairwise reduction order; aggregation results do not
// depend on accumulation chunking.
inline double pairwise_sum(const double* data, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

inline double pairwise_mean(const std::vector<double>& v) {
    if (v.empty()) throw NumericError("pairwise_mean: empty input");
    return pairwise_sum(v) / static_cast<double>(v.size());
}

inline double sample_stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = pairwise_mean(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
}

}  // namespace salsa
