#pragma once

#include <cmath>
#include <optional>
#include <vector>

// Brute-force quadratic-time rank statistics, kept independent of the
// implementations they check.
namespace rank_oracles {

// Definitional average ranks: 1 + #{less} + #{equal others}/2.
inline std::vector<double> ranks(const std::vector<double>& xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double less = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < xs.size(); ++j) {
            if (xs[j] < xs[i]) ++less;
            if (j != i && xs[j] == xs[i]) ++equal;
        }
        out[i] = 1.0 + less + equal / 2.0;
    }
    return out;
}

inline std::optional<double> spearman(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
    auto rx = ranks(xs);
    auto ry = ranks(ys);
    double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sx += rx[i];
        sy += ry[i];
        sxx += rx[i] * rx[i];
        syy += ry[i] * ry[i];
        sxy += rx[i] * ry[i];
    }
    double vx = n * sxx - sx * sx;
    double vy = n * syy - sy * sy;
    if (vx == 0.0 || vy == 0.0) return std::nullopt;
    return (n * sxy - sx * sy) / std::sqrt(vx * vy);
}

// Tau-b assembled from tie-group counts rather than pair classification.
inline std::optional<double> kendall(const std::vector<double>& xs,
                                     const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = (xs[i] - xs[j]) * (ys[i] - ys[j]);
            num += (s > 0) - (s < 0);
        }
    auto tie_term = [&](const std::vector<double>& v) {
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double run = 0.0;
            for (std::size_t j = 0; j < n; ++j) run += (v[j] == v[i]);
            t += (run - 1.0);
        }
        return t / 2.0;  // each tied pair counted twice
    };
    double n0 = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
    double denom = std::sqrt((n0 - tie_term(xs)) * (n0 - tie_term(ys)));
    if (denom == 0.0) return std::nullopt;
    return num / denom;
}

}  // namespace rank_oracles
