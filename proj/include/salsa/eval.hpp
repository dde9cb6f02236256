#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/descriptors.hpp"
#include "salsa/smiles.hpp"

namespace salsa::eval {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double euclidean(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size()) throw DataError("euclidean: dimension mismatch");
    return (a - b).norm();
}

// ---------------------------------------------------------------------------
// Rank correlation (ties handled: average ranks / tau-b)
// ---------------------------------------------------------------------------

// Fractional (average) ranks, 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Spearman's rho: Pearson correlation of average ranks. nullopt when either
// list has zero variance.
inline std::optional<double> spearman(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DataError("spearman: length mismatch");
    if (xs.size() < 2) throw DataError("spearman: need at least two observations");
    auto rx = average_ranks(xs);
    auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// Kendall's tau-b (tie corrected). nullopt when either list is constant.
inline std::optional<double> kendall(const std::vector<double>& xs,
                                     const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DataError("kendall: length mismatch");
    if (xs.size() < 2) throw DataError("kendall: need at least two observations");
    const std::size_t n = xs.size();
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0, ties_xy = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = xs[i] - xs[j];
            double dy = ys[i] - ys[j];
            if (dx == 0.0 && dy == 0.0)
                ++ties_xy;
            else if (dx == 0.0)
                ++ties_x;
            else if (dy == 0.0)
                ++ties_y;
            else if (dx * dy > 0.0)
                ++concordant;
            else
                ++discordant;
        }
    double n0 = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
    double n1 = static_cast<double>(ties_x) + static_cast<double>(ties_xy);
    double n2 = static_cast<double>(ties_y) + static_cast<double>(ties_xy);
    double denom = std::sqrt((n0 - n1) * (n0 - n2));
    if (denom == 0.0) return std::nullopt;
    return (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
}

// ---------------------------------------------------------------------------
// Slerp
// ---------------------------------------------------------------------------

inline constexpr double kSlerpParallelTol = 1e-6;

// Spherical linear interpolation between unit vectors. Near-parallel
// endpoints fall back to normalized linear interpolation; antipodal
// endpoints have no defined great circle.
inline VectorXd slerp(const VectorXd& z1, const VectorXd& z2, double t) {
    if (z1.size() != z2.size()) throw DataError("slerp: dimension mismatch");
    if (t < 0.0 || t > 1.0) throw DataError("slerp: t outside [0,1]");
    double dot = std::clamp(z1.dot(z2), -1.0, 1.0);
    double omega = std::acos(dot);
    if (omega < kSlerpParallelTol) {
        VectorXd v = (1.0 - t) * z1 + t * z2;
        return v / v.norm();
    }
    if (M_PI - omega < kSlerpParallelTol)
        throw NumericError("slerp: antipodal endpoints");
    VectorXd v = (std::sin((1.0 - t) * omega) * z1 + std::sin(t * omega) * z2) / std::sin(omega);
    return v / v.norm();
}

// ---------------------------------------------------------------------------
// GED-EuD correlation report
// ---------------------------------------------------------------------------

using Encoder = std::function<MatrixXd(const std::vector<std::string>&)>;
// Draws one stochastic decode from a latent code.
using DecoderSampler = std::function<std::string(const VectorXd&, Rng&)>;

struct CorrelationReport {
    std::string model_tag;
    int latent_dim = 0;
    std::vector<double> rho;  // per usable anchor
    std::vector<double> tau;
    int anchors_total = 0;
    int anchors_skipped = 0;  // zero EuD variance or undefined statistic
    double mean_rho = 0.0, std_rho = 0.0;
    double mean_tau = 0.0, std_tau = 0.0;
};

struct SupermutantChain {
    std::string anchor;
    std::vector<std::string> members;  // nominal GED 1..n in order
};

// Correlates nominal chain depth [1..n] against latent Euclidean distance
// per anchor, then aggregates mean and standard deviation.
inline CorrelationReport ged_eud_report(const std::vector<SupermutantChain>& chains,
                                        const Encoder& encoder, const std::string& model_tag) {
    CorrelationReport rep;
    rep.model_tag = model_tag;
    rep.anchors_total = static_cast<int>(chains.size());
    for (const auto& chain : chains) {
        if (chain.members.empty()) {
            ++rep.anchors_skipped;
            continue;
        }
        std::vector<std::string> rows = {chain.anchor};
        rows.insert(rows.end(), chain.members.begin(), chain.members.end());
        MatrixXd z = encoder(rows);
        rep.latent_dim = static_cast<int>(z.cols());
        std::vector<double> depth, dist;
        for (std::size_t m = 0; m < chain.members.size(); ++m) {
            depth.push_back(static_cast<double>(m + 1));
            dist.push_back(euclidean(z.row(0).transpose(),
                                     z.row(static_cast<Eigen::Index>(m + 1)).transpose()));
        }
        auto r = spearman(depth, dist);
        auto k = kendall(depth, dist);
        if (!r || !k) {
            ++rep.anchors_skipped;
            continue;
        }
        rep.rho.push_back(*r);
        rep.tau.push_back(*k);
    }
    if (!rep.rho.empty()) {
        rep.mean_rho = pairwise_mean(rep.rho);
        rep.std_rho = sample_stddev(rep.rho);
        rep.mean_tau = pairwise_mean(rep.tau);
        rep.std_tau = sample_stddev(rep.tau);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Interpolation study
// ---------------------------------------------------------------------------

struct InterpolationResult {
    std::string endpoint_a;
    std::string endpoint_b;
    VectorXd midpoint;
    int valid_decodes = 0;
    int total_decodes = 0;
    std::map<std::string, int> interpolant_counts;  // canonical SMILES -> count
    std::string modal_interpolant;                  // empty when no valid decode
    double tanimoto_to_a = 0.0;
    double tanimoto_to_b = 0.0;
};

inline constexpr int kInterpolationSamples = 100;
inline constexpr double kInterpolationTemperature = 1.0;

// Encode endpoints, slerp the midpoint, sample decodes, keep parseable
// outputs, report the modal canonical interpolant and its Tanimoto distance
// to both endpoints. Mode ties break toward the lower mean endpoint
// distance, then lexicographically.
inline std::vector<InterpolationResult> interpolation_study(
    const std::vector<std::pair<std::string, std::string>>& pairs, const Encoder& encoder,
    const DecoderSampler& decoder, Rng& rng, int n_samples = kInterpolationSamples) {
    std::vector<InterpolationResult> out;
    for (const auto& [sa, sb] : pairs) {
        InterpolationResult res;
        res.endpoint_a = sa;
        res.endpoint_b = sb;
        MatrixXd z = encoder({sa, sb});
        res.midpoint = slerp(z.row(0).transpose(), z.row(1).transpose(), 0.5);
        res.total_decodes = n_samples;
        for (int s = 0; s < n_samples; ++s) {
            std::string decoded = decoder(res.midpoint, rng);
            try {
                std::string canon = smiles::canonicalize(decoded);
                ++res.valid_decodes;
                ++res.interpolant_counts[canon];
            } catch (const DataError&) {
                // unparseable decode; counted via total - valid
            }
        }
        if (res.valid_decodes > 0) {
            auto fp_a = descriptors::morgan_fingerprint(smiles::parse(sa));
            auto fp_b = descriptors::morgan_fingerprint(smiles::parse(sb));
            double best_key = std::numeric_limits<double>::infinity();
            for (const auto& [canon, count] : res.interpolant_counts) {
                auto fp = descriptors::morgan_fingerprint(smiles::parse(canon));
                double da = descriptors::tanimoto_distance(fp, fp_a);
                double db = descriptors::tanimoto_distance(fp, fp_b);
                // Highest count wins; ties by lower mean distance; the map
                // iteration order (lexicographic) settles exact ties.
                double key = -static_cast<double>(count) * 1e6 + (da + db) / 2.0;
                if (key < best_key) {
                    best_key = key;
                    res.modal_interpolant = canon;
                    res.tanimoto_to_a = da;
                    res.tanimoto_to_b = db;
                }
            }
        }
        out.push_back(std::move(res));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Property-awareness report
// ---------------------------------------------------------------------------

struct PropertyCorrelationRow {
    std::string property;
    double mean_rho = 0.0;
    double std_error = 0.0;
    int draws_used = 0;
};

struct PropertyCorrelationReport {
    std::vector<PropertyCorrelationRow> rows;   // one per descriptor
    std::vector<std::string> projection_smiles; // PCA coordinates for plotting
    MatrixXd projection;                        // n x 2
};

// Correlates pairwise latent distance against per-property absolute
// differences over random draws; aggregates mean and standard error per
// property. Also emits 2-D PCA coordinates of the full sample in place of a
// learned projection.
inline PropertyCorrelationReport property_correlation_report(
    const std::vector<std::string>& molecules, const Encoder& encoder, Rng& rng,
    int n_draws = 10, int draw_size = 250) {
    if (draw_size > static_cast<int>(molecules.size()))
        throw DataError("property_correlation_report: draw_size exceeds sample size");
    if (draw_size < 3) throw DataError("property_correlation_report: draw_size too small");

    std::vector<descriptors::PropertyVector> props;
    props.reserve(molecules.size());
    for (const auto& s : molecules)
        props.push_back(descriptors::compute_properties(smiles::parse(s)));
    MatrixXd codes = encoder(molecules);

    const auto& names = descriptors::PropertyVector::names();
    std::vector<std::vector<double>> rho_per_property(descriptors::kNumProperties);

    for (int draw = 0; draw < n_draws; ++draw) {
        std::vector<std::size_t> pick(molecules.size());
        for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
        rng.shuffle(pick);
        pick.resize(static_cast<std::size_t>(draw_size));

        std::vector<double> eud;
        std::vector<std::array<double, descriptors::kNumProperties>> deltas;
        for (std::size_t i = 0; i < pick.size(); ++i)
            for (std::size_t j = i + 1; j < pick.size(); ++j) {
                eud.push_back(euclidean(codes.row(static_cast<Eigen::Index>(pick[i])).transpose(),
                                        codes.row(static_cast<Eigen::Index>(pick[j])).transpose()));
                auto vi = props[pick[i]].values();
                auto vj = props[pick[j]].values();
                std::array<double, descriptors::kNumProperties> d{};
                for (int p = 0; p < descriptors::kNumProperties; ++p)
                    d[static_cast<std::size_t>(p)] = std::abs(vi[static_cast<std::size_t>(p)] -
                                                              vj[static_cast<std::size_t>(p)]);
                deltas.push_back(d);
            }
        for (int p = 0; p < descriptors::kNumProperties; ++p) {
            std::vector<double> dp(deltas.size());
            for (std::size_t i = 0; i < deltas.size(); ++i)
                dp[i] = deltas[i][static_cast<std::size_t>(p)];
            if (auto r = spearman(dp, eud); r)
                rho_per_property[static_cast<std::size_t>(p)].push_back(*r);
        }
    }

    PropertyCorrelationReport rep;
    for (int p = 0; p < descriptors::kNumProperties; ++p) {
        PropertyCorrelationRow row;
        row.property = names[static_cast<std::size_t>(p)];
        const auto& rs = rho_per_property[static_cast<std::size_t>(p)];
        row.draws_used = static_cast<int>(rs.size());
        if (!rs.empty()) {
            row.mean_rho = pairwise_mean(rs);
            row.std_error = rs.size() > 1
                                ? sample_stddev(rs) / std::sqrt(static_cast<double>(rs.size()))
                                : 0.0;
        }
        rep.rows.push_back(row);
    }

    // Plain PCA fallback for plotting coordinates: top-2 eigenvectors of the
    // code covariance, signs fixed by the largest-magnitude component.
    MatrixXd centered = codes.rowwise() - codes.colwise().mean();
    MatrixXd cov = centered.transpose() * centered /
                   std::max(1.0, static_cast<double>(codes.rows() - 1));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    MatrixXd basis(codes.cols(), 2);
    basis.col(0) = eig.eigenvectors().col(codes.cols() - 1);
    basis.col(1) = eig.eigenvectors().col(codes.cols() - 2);
    for (int c = 0; c < 2; ++c) {
        Eigen::Index mx;
        basis.col(c).cwiseAbs().maxCoeff(&mx);
        if (basis(mx, c) < 0) basis.col(c) = -basis.col(c);
    }
    rep.projection = centered * basis;
    rep.projection_smiles = molecules;
    return rep;
}

}  // namespace salsa::eval
