#pragma once

#include <Eigen/Dense>

#include <array>
#include <bitset>
#include <cmath>
#include <string>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/molgraph.hpp"
#include "salsa/mutation.hpp"

namespace salsa::descriptors {

using molgraph::BondOrder;
using molgraph::Element;
using molgraph::MolGraph;

inline constexpr int kNumProperties = 10;

// The 10 physicochemical descriptors. All computable from the graph alone;
// logP/TPSA-style tabulated descriptors are deliberately out.
struct PropertyVector {
    double molecular_weight = 0.0;
    double heavy_atom_count = 0.0;
    double ring_count = 0.0;
    double aromatic_ring_count = 0.0;
    double hbd_count = 0.0;
    double hba_count = 0.0;
    double rotatable_bond_count = 0.0;
    double fraction_csp3 = 0.0;
    double halogen_count = 0.0;
    double heteroatom_fraction = 0.0;

    static const std::array<std::string, kNumProperties>& names() {
        static const std::array<std::string, kNumProperties> n = {
            "molecular_weight",    "heavy_atom_count",      "ring_count",
            "aromatic_ring_count", "hbd_count",             "hba_count",
            "rotatable_bond_count", "fraction_csp3",        "halogen_count",
            "heteroatom_fraction"};
        return n;
    }

    std::array<double, kNumProperties> values() const {
        return {molecular_weight, heavy_atom_count,      ring_count,
                aromatic_ring_count, hbd_count,          hba_count,
                rotatable_bond_count, fraction_csp3,     halogen_count,
                heteroatom_fraction};
    }

    Eigen::VectorXd as_vector() const {
        auto v = values();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), kNumProperties);
    }
};

namespace detail {

// A bond is in a ring iff removing it keeps the graph connected.
inline std::vector<char> ring_bond_flags(const MolGraph& g) {
    const int n = g.atom_count();
    std::vector<char> in_ring(static_cast<std::size_t>(g.bond_count()), 0);
    for (int bi = 0; bi < g.bond_count(); ++bi) {
        const auto& bond = g.bonds()[static_cast<std::size_t>(bi)];
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<int> stack = {bond.a};
        seen[static_cast<std::size_t>(bond.a)] = 1;
        bool reached = false;
        while (!stack.empty() && !reached) {
            int u = stack.back();
            stack.pop_back();
            for (const auto& [v, ei] : g.neighbors(u)) {
                if (ei == bi) continue;
                if (v == bond.b) {
                    reached = true;
                    break;
                }
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
        in_ring[static_cast<std::size_t>(bi)] = reached ? 1 : 0;
    }
    return in_ring;
}

// Cyclomatic number of the aromatic-bond subgraph, summed per component.
inline int aromatic_ring_count(const MolGraph& g) {
    const int n = g.atom_count();
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int ncomp = 0;
    for (int i = 0; i < n; ++i) {
        if (comp[static_cast<std::size_t>(i)] >= 0 || !g.atom(i).aromatic) continue;
        std::vector<int> stack = {i};
        comp[static_cast<std::size_t>(i)] = ncomp;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (const auto& [v, bi] : g.neighbors(u)) {
                if (g.bonds()[static_cast<std::size_t>(bi)].order != BondOrder::Aromatic)
                    continue;
                if (comp[static_cast<std::size_t>(v)] < 0) {
                    comp[static_cast<std::size_t>(v)] = ncomp;
                    stack.push_back(v);
                }
            }
        }
        ++ncomp;
    }
    std::vector<int> atoms(static_cast<std::size_t>(ncomp), 0);
    std::vector<int> edges(static_cast<std::size_t>(ncomp), 0);
    for (int i = 0; i < n; ++i)
        if (comp[static_cast<std::size_t>(i)] >= 0)
            ++atoms[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])];
    for (const auto& b : g.bonds())
        if (b.order == BondOrder::Aromatic)
            ++edges[static_cast<std::size_t>(comp[static_cast<std::size_t>(b.a)])];
    int rings = 0;
    for (int c = 0; c < ncomp; ++c)
        rings += std::max(0, edges[static_cast<std::size_t>(c)] -
                                 atoms[static_cast<std::size_t>(c)] + 1);
    return rings;
}

}  // namespace detail

inline PropertyVector compute_properties(const MolGraph& g) {
    auto violations = molgraph::validate(g);
    if (!violations.empty())
        throw DataError("compute_properties: invalid graph: " + violations.front().message);

    PropertyVector p;
    const int n = g.atom_count();
    p.heavy_atom_count = n;
    p.ring_count = g.ring_count();
    p.aromatic_ring_count = detail::aromatic_ring_count(g);

    int carbons = 0, sp3_carbons = 0, hetero = 0;
    for (int i = 0; i < n; ++i) {
        const auto& a = g.atom(i);
        int hs = molgraph::implicit_hydrogens(g, i);
        p.molecular_weight += molgraph::atomic_weight(a.element) + 1.008 * hs;
        if (a.element == Element::N || a.element == Element::O) {
            p.hba_count += 1;
            if (hs >= 1) p.hbd_count += 1;
        }
        if (molgraph::is_halogen(a.element)) p.halogen_count += 1;
        if (a.element == Element::C) {
            ++carbons;
            bool all_single = !a.aromatic;
            for (const auto& [v, bi] : g.neighbors(i)) {
                (void)v;
                if (g.bonds()[static_cast<std::size_t>(bi)].order != BondOrder::Single)
                    all_single = false;
            }
            if (all_single) ++sp3_carbons;
        } else {
            ++hetero;
        }
    }
    p.fraction_csp3 =
        carbons > 0 ? static_cast<double>(sp3_carbons) / static_cast<double>(carbons) : 0.0;
    p.heteroatom_fraction = static_cast<double>(hetero) / static_cast<double>(n);

    auto in_ring = detail::ring_bond_flags(g);
    for (int bi = 0; bi < g.bond_count(); ++bi) {
        const auto& b = g.bonds()[static_cast<std::size_t>(bi)];
        if (b.order != BondOrder::Single) continue;
        if (in_ring[static_cast<std::size_t>(bi)]) continue;
        if (g.degree(b.a) >= 2 && g.degree(b.b) >= 2) p.rotatable_bond_count += 1;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Mahalanobis faulty-positive filter
// ---------------------------------------------------------------------------

struct CovarianceModel {
    Eigen::VectorXd mean;      // R^10
    Eigen::MatrixXd sigma;     // R^{10x10}
    double epsilon = 0.0;      // ridge added to the diagonal
    Eigen::LLT<Eigen::MatrixXd> llt;  // factorization of sigma + eps*I

    Eigen::MatrixXd regularized() const {
        return sigma + epsilon * Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols());
    }
};

inline constexpr int kMinCovarianceSamples = kNumProperties + 1;

// Sample mean/covariance with a trace-scaled ridge. The ridge keeps the
// model positive definite even when the sample is degenerate; a tiny
// absolute floor covers the all-identical case where trace(Sigma) = 0.
inline CovarianceModel fit_covariance(const std::vector<PropertyVector>& samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n < kMinCovarianceSamples)
        throw DataError("fit_covariance: need at least " +
                        std::to_string(kMinCovarianceSamples) + " samples, got " +
                        std::to_string(n));
    Eigen::MatrixXd x(n, kNumProperties);
    for (Eigen::Index i = 0; i < n; ++i)
        x.row(i) = samples[static_cast<std::size_t>(i)].as_vector().transpose();

    CovarianceModel m;
    m.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
    m.sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
    m.epsilon = std::max(1e-6 * m.sigma.trace() / kNumProperties, 1e-12);
    m.llt.compute(m.regularized());
    if (m.llt.info() != Eigen::Success)
        throw NumericError("fit_covariance: regularized covariance not positive definite");
    return m;
}

inline double mahalanobis(const PropertyVector& x, const PropertyVector& y,
                          const CovarianceModel& model) {
    Eigen::VectorXd d = x.as_vector() - y.as_vector();
    double q = d.dot(model.llt.solve(d));
    return std::sqrt(std::max(0.0, q));
}

// Regularized lower incomplete gamma P(a, x); series for x < a+1, continued
// fraction otherwise (Numerical Recipes construction).
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw NumericError("gamma_p: domain error");
    if (x == 0.0) return 0.0;
    double g = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - g);
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - g) * h;
}

// Quantile of the chi-square distribution with k degrees of freedom, via
// bisection on the CDF.
inline double chi_square_quantile(double q, int k) {
    if (q <= 0.0 || q >= 1.0) throw NumericError("chi_square_quantile: q outside (0,1)");
    double lo = 0.0, hi = 1.0;
    while (gamma_p(k / 2.0, hi / 2.0) < q) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (gamma_p(k / 2.0, mid / 2.0) < q)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Default filter threshold: sqrt of the 0.99 chi-square quantile at 10
// degrees of freedom (~4.82), in the same units as the distance itself.
inline double default_filter_threshold(double chi2_q = 0.99) {
    return std::sqrt(chi_square_quantile(chi2_q, kNumProperties));
}

// Marks each mutant KEPT or FAULTY by Mahalanobis distance to its anchor;
// input ordering is preserved.
inline void filter_faulty_positives(const PropertyVector& anchor_props,
                                    std::vector<mutation::MutantRecord>& mutants,
                                    const std::vector<PropertyVector>& mutant_props,
                                    const CovarianceModel& model, double threshold) {
    if (mutants.size() != mutant_props.size())
        throw DataError("filter_faulty_positives: records/properties size mismatch");
    for (std::size_t i = 0; i < mutants.size(); ++i) {
        double d = mahalanobis(anchor_props, mutant_props[i], model);
        mutants[i].verdict = d > threshold ? mutation::FilterVerdict::Faulty
                                           : mutation::FilterVerdict::Kept;
    }
}

// ---------------------------------------------------------------------------
// Morgan-style circular fingerprint and Tanimoto distance
// ---------------------------------------------------------------------------

inline constexpr int kFingerprintBits = 2048;
inline constexpr int kFingerprintRadius = 2;
// Seed constant for the environment hash, frozen so fingerprints are stable
// across platforms and releases.
inline constexpr std::uint64_t kFingerprintSeed = 0x53414c5341465021ULL;

struct Fingerprint {
    std::bitset<kFingerprintBits> bits;

    int popcount() const { return static_cast<int>(bits.count()); }
};

// Iterative neighborhood hashing: atom invariant (element, degree, aromatic,
// implicit H count), then `radius` rounds folding in sorted
// (bond order, neighbor id) pairs; every round's identifiers set a bit.
inline Fingerprint morgan_fingerprint(const MolGraph& g, int radius = kFingerprintRadius,
                                      int nbits = kFingerprintBits) {
    if (nbits <= 0 || nbits > kFingerprintBits)
        throw DataError("morgan_fingerprint: unsupported bit length");
    const int n = g.atom_count();
    std::vector<std::uint64_t> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& a = g.atom(i);
        std::uint64_t h = mix64(kFingerprintSeed, static_cast<std::uint64_t>(a.element));
        h = mix64(h, static_cast<std::uint64_t>(g.degree(i)));
        h = mix64(h, a.aromatic ? 1u : 0u);
        h = mix64(h, static_cast<std::uint64_t>(molgraph::implicit_hydrogens(g, i)));
        ids[static_cast<std::size_t>(i)] = h;
    }

    Fingerprint fp;
    auto set_bits = [&](const std::vector<std::uint64_t>& round) {
        for (std::uint64_t id : round)
            fp.bits.set(static_cast<std::size_t>(id % static_cast<std::uint64_t>(nbits)));
    };
    set_bits(ids);
    for (int r = 0; r < radius; ++r) {
        std::vector<std::uint64_t> next(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
            for (const auto& [v, bi] : g.neighbors(i))
                env.push_back({static_cast<std::uint64_t>(
                                   g.bonds()[static_cast<std::size_t>(bi)].order),
                               ids[static_cast<std::size_t>(v)]});
            std::sort(env.begin(), env.end());
            std::uint64_t h = mix64(ids[static_cast<std::size_t>(i)],
                                    static_cast<std::uint64_t>(r + 1));
            for (const auto& [order, nid] : env) h = mix64(mix64(h, order), nid);
            next[static_cast<std::size_t>(i)] = h;
        }
        set_bits(next);
        ids = std::move(next);
    }
    return fp;
}

// 1 - |a AND b| / |a OR b|; two empty fingerprints are at distance 0.
inline double tanimoto_distance(const Fingerprint& a, const Fingerprint& b) {
    auto inter = (a.bits & b.bits).count();
    auto uni = (a.bits | b.bits).count();
    if (uni == 0) return 0.0;
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace salsa::descriptors
