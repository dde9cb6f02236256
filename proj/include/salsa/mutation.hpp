#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/isomorphism.hpp"
#include "salsa/molgraph.hpp"
#include "salsa/smiles.hpp"

namespace salsa::mutation {

using molgraph::BondOrder;
using molgraph::Element;
using molgraph::MolGraph;

enum class MutationKind : std::uint8_t { Add = 0, Replace = 1, Remove = 2 };

inline const char* kind_name(MutationKind k) {
    switch (k) {
        case MutationKind::Add: return "add";
        case MutationKind::Replace: return "replace";
        case MutationKind::Remove: return "remove";
    }
    return "?";
}

inline std::optional<MutationKind> kind_from_name(std::string_view s) {
    if (s == "add") return MutationKind::Add;
    if (s == "replace") return MutationKind::Replace;
    if (s == "remove") return MutationKind::Remove;
    return std::nullopt;
}

struct MutationOp {
    MutationKind kind = MutationKind::Add;
    int site = -1;  // pre-edit atom id
    std::optional<Element> new_element;  // ADD / REPLACE only
};

// Element probabilities over the 10 concrete atom types; Other is excluded.
struct AtomDistribution {
    std::array<double, molgraph::kNumConcreteElements> probs{};

    static AtomDistribution uniform() {
        AtomDistribution d;
        d.probs.fill(1.0 / molgraph::kNumConcreteElements);
        return d;
    }

    double prob(Element e) const {
        return probs[static_cast<std::size_t>(static_cast<int>(e))];
    }

    void check() const {
        double total = 0.0;
        for (double p : probs) {
            if (p < 0.0) throw DataError("AtomDistribution: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw DataError("AtomDistribution: probabilities must sum to 1");
    }

    // Draw restricted to `legal`, renormalized.
    Element sample(Rng& rng, const std::vector<Element>& legal) const {
        if (legal.empty()) throw DataError("AtomDistribution: no legal elements");
        std::vector<double> w(legal.size());
        double total = 0.0;
        for (std::size_t i = 0; i < legal.size(); ++i) {
            w[i] = prob(legal[i]);
            total += w[i];
        }
        if (total <= 0.0) {
            // All legal elements carry zero observed mass; fall back to
            // uniform over the legal set.
            std::fill(w.begin(), w.end(), 1.0);
        }
        return legal[rng.categorical(w)];
    }
};

// Provenance of one generated mutant.
enum class FilterVerdict : std::uint8_t { Unverified = 0, Kept = 1, Faulty = 2 };

inline const char* verdict_name(FilterVerdict v) {
    switch (v) {
        case FilterVerdict::Unverified: return "UNVERIFIED";
        case FilterVerdict::Kept: return "KEPT";
        case FilterVerdict::Faulty: return "FAULTY";
    }
    return "?";
}

inline std::optional<FilterVerdict> verdict_from_name(std::string_view s) {
    if (s == "UNVERIFIED") return FilterVerdict::Unverified;
    if (s == "KEPT") return FilterVerdict::Kept;
    if (s == "FAULTY") return FilterVerdict::Faulty;
    return std::nullopt;
}

struct MutantRecord {
    std::int64_t anchor_id = 0;
    int mutant_index = 0;  // j; 0 marks the anchor row itself
    std::vector<MutationOp> ops;
    std::string smiles;  // canonical
    int ged_nominal = 0;
    FilterVerdict verdict = FilterVerdict::Unverified;
};

// Elements legal as a REPLACE target at `site`: some allowed valence must
// cover the current bond-order sum. Aromatic sites are restricted to C <-> N
// (both contribute one pi electron; swapping O or S in or out would change
// the ring pi count and force aromaticity re-perception).
inline std::vector<Element> legal_replace_elements(const MolGraph& g, int site) {
    const auto& a = g.atom(site);
    if (a.element == Element::Other) return {};
    if (a.aromatic && !(a.element == Element::C || a.element == Element::N)) return {};
    std::vector<Element> out;
    for (Element e : molgraph::kConcreteElements) {
        if (e == a.element) continue;
        if (a.aromatic && !(e == Element::C || e == Element::N)) continue;
        int sum = g.bond_order_sum(site) -
                  molgraph::pi_reservation(a.element, a.aromatic) +
                  molgraph::pi_reservation(e, a.aromatic);
        if (molgraph::target_valence(e, sum)) out.push_back(e);
    }
    return out;
}

// ADD accepts any concrete element (attached by a single bond).
inline std::vector<Element> legal_add_elements() {
    return {molgraph::kConcreteElements.begin(), molgraph::kConcreteElements.end()};
}

// Legal op templates of one kind; new_element is left unset.
inline std::vector<MutationOp> enumerate_sites(const MolGraph& g, MutationKind kind) {
    std::vector<MutationOp> out;
    switch (kind) {
        case MutationKind::Add:
            for (int i = 0; i < g.atom_count(); ++i) {
                if (g.atom(i).element == Element::Other) continue;
                if (molgraph::implicit_hydrogens(g, i) >= 1)
                    out.push_back({MutationKind::Add, i, std::nullopt});
            }
            break;
        case MutationKind::Replace:
            for (int i = 0; i < g.atom_count(); ++i)
                if (!legal_replace_elements(g, i).empty())
                    out.push_back({MutationKind::Replace, i, std::nullopt});
            break;
        case MutationKind::Remove:
            // Singly-attached: degree 1 over a single bond, so that every
            // REMOVE is the exact inverse of an ADD and the edit algebra
            // stays self-inverse.
            if (g.atom_count() < 2) break;
            for (int i = 0; i < g.atom_count(); ++i) {
                if (g.degree(i) != 1 || g.atom(i).aromatic ||
                    g.atom(i).element == Element::Other)
                    continue;
                int bi = g.neighbors(i).front().second;
                if (g.bonds()[static_cast<std::size_t>(bi)].order == BondOrder::Single)
                    out.push_back({MutationKind::Remove, i, std::nullopt});
            }
            break;
    }
    return out;
}

// Applies a single validity-preserving node edit. The result is valid,
// connected and never isomorphic to the input: ADD/REMOVE change the atom
// count, REPLACE changes the element multiset.
inline MolGraph apply(const MolGraph& g, const MutationOp& op) {
    MolGraph out = g;
    switch (op.kind) {
        case MutationKind::Add: {
            if (!op.new_element) throw DataError("apply: ADD requires an element");
            if (op.site < 0 || op.site >= g.atom_count())
                throw DataError("apply: site out of range");
            if (molgraph::implicit_hydrogens(g, op.site) < 1)
                throw DataError("apply: ADD site has no free valence");
            int id = out.add_atom(*op.new_element, false);
            out.add_bond(op.site, id, BondOrder::Single);
            break;
        }
        case MutationKind::Replace: {
            if (!op.new_element) throw DataError("apply: REPLACE requires an element");
            if (op.site < 0 || op.site >= g.atom_count())
                throw DataError("apply: site out of range");
            auto legal = legal_replace_elements(g, op.site);
            if (std::find(legal.begin(), legal.end(), *op.new_element) == legal.end())
                throw DataError("apply: illegal REPLACE target element");
            out.atom(op.site).element = *op.new_element;
            break;
        }
        case MutationKind::Remove: {
            if (op.site < 0 || op.site >= g.atom_count())
                throw DataError("apply: site out of range");
            if (g.degree(op.site) != 1 || g.atom(op.site).aromatic || g.atom_count() < 2)
                throw DataError("apply: illegal REMOVE site");
            int bi = g.neighbors(op.site).front().second;
            if (g.bonds()[static_cast<std::size_t>(bi)].order != BondOrder::Single)
                throw DataError("apply: REMOVE site not singly-attached");
            out.remove_atom(op.site);
            break;
        }
    }
    auto violations = molgraph::validate(out);
    if (!violations.empty())
        throw NumericError("apply: post-edit validity failure (bug): " +
                           violations.front().message);
    return out;
}

// Uniform over kinds with a non-empty site list, uniform site, incoming
// element from `dist` restricted to the legal set.
inline std::pair<MolGraph, MutationOp> sample_mutant(const MolGraph& g, Rng& rng,
                                                     const AtomDistribution& dist) {
    std::array<std::vector<MutationOp>, 3> sites = {
        enumerate_sites(g, MutationKind::Add),
        enumerate_sites(g, MutationKind::Replace),
        enumerate_sites(g, MutationKind::Remove),
    };
    std::vector<int> live;
    for (int k = 0; k < 3; ++k)
        if (!sites[static_cast<std::size_t>(k)].empty()) live.push_back(k);
    if (live.empty()) throw DataError("sample_mutant: no legal operation");

    int kind_idx = live[rng.index(live.size())];
    const auto& list = sites[static_cast<std::size_t>(kind_idx)];
    MutationOp op = list[rng.index(list.size())];
    if (op.kind == MutationKind::Add) {
        op.new_element = dist.sample(rng, legal_add_elements());
    } else if (op.kind == MutationKind::Replace) {
        op.new_element = dist.sample(rng, legal_replace_elements(g, op.site));
    }
    return {apply(g, op), op};
}

namespace detail {

// Exhaustive distinct canonical 1-neighborhood (used as a fallback when
// random retries cannot fill a positive set).
inline std::vector<std::pair<std::string, MutationOp>> one_neighborhood(const MolGraph& g) {
    std::vector<std::pair<std::string, MutationOp>> out;
    std::set<std::string> seen;
    auto consider = [&](MutationOp op) {
        MolGraph m = apply(g, op);
        std::string canon = smiles::write(m);
        if (seen.insert(canon).second) out.push_back({canon, op});
    };
    for (const auto& t : enumerate_sites(g, MutationKind::Add))
        for (Element e : legal_add_elements()) {
            MutationOp op = t;
            op.new_element = e;
            consider(op);
        }
    for (const auto& t : enumerate_sites(g, MutationKind::Replace))
        for (Element e : legal_replace_elements(g, t.site)) {
            MutationOp op = t;
            op.new_element = e;
            consider(op);
        }
    for (const auto& t : enumerate_sites(g, MutationKind::Remove)) consider(t);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

}  // namespace detail

inline constexpr int kRetryBudgetPerSlot = 50;

// Up to k mutants one edit from the anchor, pairwise-distinct canonical
// SMILES, none equal to the anchor. Random sampling with a retry budget;
// falls back to exhaustive 1-neighborhood enumeration so a short set is
// returned only when the neighbor space is truly exhausted.
inline std::vector<MutantRecord> generate_positive_set(const MolGraph& anchor,
                                                       std::int64_t anchor_id, int k, Rng& rng,
                                                       const AtomDistribution& dist) {
    bool any_legal = false;
    for (int kd = 0; kd < 3 && !any_legal; ++kd)
        any_legal = !enumerate_sites(anchor, static_cast<MutationKind>(kd)).empty();
    if (!any_legal) throw DataError("generate_positive_set: anchor has no legal ops");

    std::string anchor_canon = smiles::write(anchor);
    std::set<std::string> used = {anchor_canon};
    std::vector<MutantRecord> out;

    for (int slot = 0; slot < k; ++slot) {
        bool filled = false;
        for (int attempt = 0; attempt < kRetryBudgetPerSlot && !filled; ++attempt) {
            auto [m, op] = sample_mutant(anchor, rng, dist);
            std::string canon = smiles::write(m);
            if (!used.insert(canon).second) continue;
            out.push_back({anchor_id, slot + 1, {op}, std::move(canon), 1,
                           FilterVerdict::Unverified});
            filled = true;
        }
        if (!filled) {
            // Deterministic fill from the full neighborhood; stop when the
            // space is exhausted.
            for (const auto& [canon, op] : detail::one_neighborhood(anchor)) {
                if (static_cast<int>(out.size()) >= k) break;
                if (!used.insert(canon).second) continue;
                out.push_back({anchor_id, static_cast<int>(out.size()) + 1, {op}, canon, 1,
                               FilterVerdict::Unverified});
            }
            break;
        }
    }
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j].mutant_index = static_cast<int>(j) + 1;
    return out;
}

inline constexpr int kChainRetryBudget = 50;

// Supermutant chain: member m is one edit applied to member m-1 (cumulative
// ops recorded). A step may not undo the previous one, and every member must
// differ (as a canonical graph) from the anchor and all earlier members.
inline std::vector<MutantRecord> generate_supermutant_chain(const MolGraph& anchor,
                                                            std::int64_t anchor_id, int n,
                                                            Rng& rng,
                                                            const AtomDistribution& dist) {
    std::vector<MutantRecord> out;
    std::set<std::string> seen = {smiles::write(anchor)};
    MolGraph current = anchor;
    std::vector<MutationOp> history;

    // Context of the previous step, with ids valid in `current`.
    struct PrevStep {
        MutationKind kind;
        int add_site = -1;      // ADD: attachment atom
        int added_atom = -1;    // ADD: the new atom
        int replace_site = -1;  // REPLACE: edited atom
        Element replaced_from = Element::C;
        int remove_anchor = -1;  // REMOVE: atom the removed one hung from
    };
    std::optional<PrevStep> prev;

    // A step may not undo the previous one, and consecutive steps may not
    // compose into a single edit. Blocked pairs: after ADD at u creating a,
    // no REMOVE of a/u/neighbors-of-u and no REPLACE at a (either collapses
    // to one ADD or one REPLACE); after REPLACE at s, no REPLACE or REMOVE
    // at s and no ADD of the prior element at s; after REMOVE from w, no ADD
    // at w. Symmetric-orbit collapses remain and are measured by the oracle.
    auto blocked = [&](const MutationOp& op) {
        if (!prev) return false;
        switch (prev->kind) {
            case MutationKind::Add:
                if (op.kind == MutationKind::Remove &&
                    (op.site == prev->added_atom || op.site == prev->add_site ||
                     current.find_bond(op.site, prev->add_site).has_value()))
                    return true;
                if (op.kind == MutationKind::Replace && op.site == prev->added_atom)
                    return true;
                return false;
            case MutationKind::Replace:
                if ((op.kind == MutationKind::Replace || op.kind == MutationKind::Remove) &&
                    op.site == prev->replace_site)
                    return true;
                if (op.kind == MutationKind::Add && op.site == prev->replace_site &&
                    op.new_element == prev->replaced_from)
                    return true;
                return false;
            case MutationKind::Remove:
                return op.kind == MutationKind::Add && op.site == prev->remove_anchor;
        }
        return false;
    };

    for (int m = 1; m <= n; ++m) {
        bool extended = false;
        for (int attempt = 0; attempt < kChainRetryBudget && !extended; ++attempt) {
            auto [cand, op] = sample_mutant(current, rng, dist);
            if (blocked(op)) continue;
            std::string canon = smiles::write(cand);
            if (!seen.insert(canon).second) continue;

            PrevStep ctx{op.kind};
            if (op.kind == MutationKind::Add) {
                ctx.add_site = op.site;
                ctx.added_atom = cand.atom_count() - 1;
            } else if (op.kind == MutationKind::Replace) {
                ctx.replace_site = op.site;
                ctx.replaced_from = current.atom(op.site).element;
            } else {
                int w = current.neighbors(op.site).front().first;
                ctx.remove_anchor = w > op.site ? w - 1 : w;
            }
            prev = ctx;
            history.push_back(op);
            out.push_back({anchor_id, m, history, std::move(canon), m,
                           FilterVerdict::Unverified});
            current = std::move(cand);
            extended = true;
        }
        if (!extended) break;  // truncated chain
    }
    return out;
}

// Relative frequencies of the 10 concrete elements over a corpus; Other is
// excluded from the denominator.
template <typename GraphRange>
AtomDistribution atom_type_distribution(const GraphRange& corpus) {
    std::array<double, molgraph::kNumConcreteElements> counts{};
    double total = 0.0;
    for (const MolGraph& g : corpus) {
        for (const auto& a : g.atoms()) {
            if (a.element == Element::Other) continue;
            counts[static_cast<std::size_t>(static_cast<int>(a.element))] += 1.0;
            total += 1.0;
        }
    }
    if (total == 0.0)
        throw DataError("atom_type_distribution: empty corpus");
    AtomDistribution d;
    for (std::size_t i = 0; i < counts.size(); ++i) d.probs[i] = counts[i] / total;
    return d;
}

}  // namespace salsa::mutation
