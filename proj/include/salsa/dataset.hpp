#pragma once

#include <set>
#include <string>
#include <thread>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/eval.hpp"
#include "salsa/model.hpp"
#include "salsa/mutation.hpp"
#include "salsa/smiles.hpp"

namespace salsa::dataset {

// Output bytes depend only on (seed, inputs); anchors carry independent RNG
// streams keyed by (seed, anchor index), so worker count never changes the
// result.
inline constexpr std::uint64_t kCorpusStream = 0x636f72707573ULL;
inline constexpr std::uint64_t kMutantStream = 0x6d7574616e74ULL;
inline constexpr std::uint64_t kChainStream = 0x636861696eULL;

struct CorpusOptions {
    int min_heavy = 4;
    int max_heavy = 10;
    int max_chars = 26;  // canonical SMILES length cap
};

// Composition used when growing synthetic molecules (carbon-dominated,
// drug-like flavor).
inline mutation::AtomDistribution organic_distribution() {
    mutation::AtomDistribution d;
    // Order: C O N S Br Cl I F P B.
    d.probs = {0.62, 0.13, 0.12, 0.03, 0.005, 0.03, 0.002, 0.04, 0.002, 0.001};
    double total = 0.0;
    for (double p : d.probs) total += p;
    for (double& p : d.probs) p /= total;
    return d;
}

namespace detail {

inline molgraph::MolGraph random_skeleton(Rng& rng) {
    static const std::vector<std::string> seeds = {"C", "C", "CC", "CCO", "C1CCCC1",
                                                   "C1CCCCC1", "c1ccccc1", "c1ccccc1",
                                                   "c1ccncc1", "c1ccoc1", "c1ccsc1"};
    return smiles::parse(seeds[rng.index(seeds.size())]);
}

}  // namespace detail

// One synthetic molecule grown from a skeleton with legal single edits.
// Returns the canonical SMILES, or nullopt when the draw leaves the
// constraints unsatisfied.
inline std::optional<std::string> synthesize_molecule(Rng& rng, const CorpusOptions& opts,
                                                      const mutation::AtomDistribution& dist) {
    molgraph::MolGraph g = detail::random_skeleton(rng);
    int edits = 2 + static_cast<int>(rng.index(7));
    for (int e = 0; e < edits && g.atom_count() < opts.max_heavy; ++e) {
        try {
            g = mutation::sample_mutant(g, rng, dist).first;
        } catch (const DataError&) {
            break;
        }
    }
    if (g.atom_count() < opts.min_heavy || g.atom_count() > opts.max_heavy)
        return std::nullopt;
    std::string canon = smiles::write(g);
    if (static_cast<int>(canon.size()) > opts.max_chars) return std::nullopt;
    return canon;
}

// n distinct canonical molecules; deterministic in (seed, opts).
inline std::vector<std::string> synthesize_corpus(int n, std::uint64_t seed,
                                                  const CorpusOptions& opts = {}) {
    auto dist = organic_distribution();
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::uint64_t index = 0;
    int dry_streak = 0;
    while (static_cast<int>(out.size()) < n) {
        Rng rng(seed, kCorpusStream + index++);
        auto canon = synthesize_molecule(rng, opts, dist);
        if (canon && seen.insert(*canon).second) {
            out.push_back(*canon);
            dry_streak = 0;
        } else if (++dry_streak > 200000) {
            throw DataError("synthesize_corpus: molecule space exhausted before reaching n");
        }
    }
    return out;
}

namespace detail {

// Deterministic parallel map over anchor indices: results land in
// pre-assigned slots, so the merged output is independent of scheduling.
template <typename Fn>
void parallel_over_anchors(std::size_t count, int workers, Fn&& fn) {
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t per = (count + static_cast<std::size_t>(workers) - 1) /
                      static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        std::size_t lo = static_cast<std::size_t>(w) * per;
        std::size_t hi = std::min(count, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Positive sets for every anchor. Output: anchor row (j = 0, empty ops)
// followed by its mutants, anchors in input order.
inline std::vector<mutation::MutantRecord> generate_dataset(
    const std::vector<std::string>& anchors, int k, std::uint64_t seed,
    const mutation::AtomDistribution& dist, int workers = 1) {
    std::vector<std::vector<mutation::MutantRecord>> slots(anchors.size());
    detail::parallel_over_anchors(
        anchors.size(), workers, [&](std::size_t i) {
            auto graph = smiles::parse(anchors[i]);
            std::string canon = smiles::write(graph);
            Rng rng(seed, kMutantStream + i);
            std::vector<mutation::MutantRecord> rows;
            rows.push_back({static_cast<std::int64_t>(i), 0, {}, canon, 0,
                            mutation::FilterVerdict::Unverified});
            auto mutants = mutation::generate_positive_set(
                graph, static_cast<std::int64_t>(i), k, rng, dist);
            rows.insert(rows.end(), mutants.begin(), mutants.end());
            slots[i] = std::move(rows);
        });
    std::vector<mutation::MutantRecord> out;
    for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
    return out;
}

// Supermutant chains for every anchor (cumulative ops, nominal depth 1..n).
inline std::vector<mutation::MutantRecord> generate_supermutants(
    const std::vector<std::string>& anchors, int n, std::uint64_t seed,
    const mutation::AtomDistribution& dist, int workers = 1) {
    std::vector<std::vector<mutation::MutantRecord>> slots(anchors.size());
    detail::parallel_over_anchors(
        anchors.size(), workers, [&](std::size_t i) {
            auto graph = smiles::parse(anchors[i]);
            std::string canon = smiles::write(graph);
            Rng rng(seed, kChainStream + i);
            std::vector<mutation::MutantRecord> rows;
            rows.push_back({static_cast<std::int64_t>(i), 0, {}, canon, 0,
                            mutation::FilterVerdict::Unverified});
            auto chain = mutation::generate_supermutant_chain(
                graph, static_cast<std::int64_t>(i), n, rng, dist);
            rows.insert(rows.end(), chain.begin(), chain.end());
            slots[i] = std::move(rows);
        });
    std::vector<mutation::MutantRecord> out;
    for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
    return out;
}

// Groups a record stream into anchors with their usable positives (FAULTY
// rows dropped); anchors left without positives are skipped and counted.
struct GroupedDataset {
    std::vector<model::AnchorGroup> groups;
    int anchors_dropped = 0;   // no usable positives
    int rows_dropped = 0;      // over-length sequences
};

inline GroupedDataset group_records(const std::vector<mutation::MutantRecord>& records,
                                    int max_len) {
    GroupedDataset out;
    std::map<std::int64_t, model::AnchorGroup> by_anchor;
    std::vector<std::int64_t> order;
    for (const auto& r : records) {
        int token_len = static_cast<int>(smiles::tokenize(r.smiles).size());
        if (token_len > max_len) {
            ++out.rows_dropped;
            continue;
        }
        if (r.mutant_index == 0) {
            if (!by_anchor.count(r.anchor_id)) order.push_back(r.anchor_id);
            by_anchor[r.anchor_id].anchor = r.smiles;
        } else {
            if (r.verdict == mutation::FilterVerdict::Faulty) continue;
            if (!by_anchor.count(r.anchor_id)) order.push_back(r.anchor_id);
            by_anchor[r.anchor_id].positives.push_back(r.smiles);
        }
    }
    for (std::int64_t id : order) {
        auto& g = by_anchor[id];
        if (g.anchor.empty() || g.positives.empty()) {
            ++out.anchors_dropped;
            continue;
        }
        out.groups.push_back(std::move(g));
    }
    return out;
}

// Chains keyed by anchor id, in record order, for the evaluation protocol.
inline std::vector<eval::SupermutantChain> chains_from_records(
    const std::vector<mutation::MutantRecord>& records) {
    std::map<std::int64_t, eval::SupermutantChain> by_anchor;
    std::vector<std::int64_t> order;
    for (const auto& r : records) {
        if (!by_anchor.count(r.anchor_id)) order.push_back(r.anchor_id);
        auto& chain = by_anchor[r.anchor_id];
        if (r.mutant_index == 0)
            chain.anchor = r.smiles;
        else
            chain.members.push_back(r.smiles);
    }
    std::vector<eval::SupermutantChain> out;
    for (std::int64_t id : order) {
        if (by_anchor[id].anchor.empty()) throw DataError("chains: missing anchor row");
        out.push_back(std::move(by_anchor[id]));
    }
    return out;
}

}  // namespace salsa::dataset
