#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "salsa/isomorphism.hpp"
#include "salsa/molgraph.hpp"
#include "salsa/mutation.hpp"
#include "salsa/smiles.hpp"

namespace salsa::molgraph {

// Combinatorial-search guard for the exact oracle.
inline constexpr int kGedAtomGuard = 14;

namespace detail {

// All distinct canonical products one legal edit away.
inline std::vector<std::pair<std::string, MolGraph>> edit_neighborhood(const MolGraph& g) {
    std::vector<std::pair<std::string, MolGraph>> out;
    std::unordered_set<std::string> seen;
    auto consider = [&](const mutation::MutationOp& op) {
        MolGraph m = mutation::apply(g, op);
        std::string canon = smiles::write(m);
        if (seen.insert(canon).second) out.push_back({std::move(canon), std::move(m)});
    };
    for (const auto& t : mutation::enumerate_sites(g, mutation::MutationKind::Add))
        for (Element e : mutation::legal_add_elements()) {
            auto op = t;
            op.new_element = e;
            consider(op);
        }
    for (const auto& t : mutation::enumerate_sites(g, mutation::MutationKind::Replace))
        for (Element e : mutation::legal_replace_elements(g, t.site)) {
            auto op = t;
            op.new_element = e;
            consider(op);
        }
    for (const auto& t : mutation::enumerate_sites(g, mutation::MutationKind::Remove))
        consider(t);
    return out;
}

// Exact-distance BFS levels keyed by canonical SMILES. levels[d] holds the
// states first reached at depth d.
struct EditLevels {
    std::vector<std::unordered_map<std::string, MolGraph>> levels;
    std::unordered_set<std::string> visited;

    explicit EditLevels(const MolGraph& start) {
        std::string canon = smiles::write(start);
        visited.insert(canon);
        levels.push_back({{std::move(canon), start}});
    }

    void expand() {
        std::unordered_map<std::string, MolGraph> next;
        for (const auto& [canon, g] : levels.back()) {
            (void)canon;
            for (auto& [ncanon, ng] : edit_neighborhood(g)) {
                if (visited.insert(ncanon).second) next.emplace(std::move(ncanon), std::move(ng));
            }
        }
        levels.push_back(std::move(next));
    }
};

inline bool levels_intersect(const std::unordered_map<std::string, MolGraph>& a,
                             const std::unordered_map<std::string, MolGraph>& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    for (const auto& [canon, g] : small) {
        (void)g;
        if (large.count(canon)) return true;
    }
    return false;
}

}  // namespace detail

// Exact graph edit distance in the node-edit algebra shared with the
// mutation engine (add / replace / remove, validity-preserving; no edge-only
// edits, so ring making and breaking are unreachable). Returns the minimum
// number of edits making g1 isomorphic to g2, or nullopt when it exceeds
// max_d.
//
// Meet-in-the-middle over exact BFS levels: the edit set is self-inverse
// (add <-> remove, replace <-> replace), so distance k exists iff the
// ceil(k/2) level around g1 intersects the floor(k/2) level around g2.
inline std::optional<int> ged_exact(const MolGraph& g1, const MolGraph& g2, int max_d) {
    if (g1.atom_count() > kGedAtomGuard || g2.atom_count() > kGedAtomGuard)
        throw DataError("ged_exact: graph exceeds the " + std::to_string(kGedAtomGuard) +
                        "-atom search guard");
    if (max_d < 0) throw DataError("ged_exact: negative max_d");

    // The cycle rank, the double/triple bond counts and the aromatic
    // substructure are invariant under the edit algebra; a mismatch is
    // unreachable at any depth.
    if (g1.ring_count() != g2.ring_count()) return std::nullopt;
    auto multi_bond_profile = [](const MolGraph& g) {
        int doubles = 0, triples = 0;
        for (const auto& b : g.bonds()) {
            doubles += (b.order == BondOrder::Double);
            triples += (b.order == BondOrder::Triple);
        }
        return std::pair(doubles, triples);
    };
    if (multi_bond_profile(g1) != multi_bond_profile(g2)) return std::nullopt;
    auto aromatic_profile = [](const MolGraph& g) {
        int atoms = 0, o = 0, s = 0, bonds = 0;
        for (const auto& a : g.atoms()) {
            atoms += a.aromatic;
            o += (a.aromatic && a.element == Element::O);
            s += (a.aromatic && a.element == Element::S);
        }
        for (const auto& b : g.bonds()) bonds += (b.order == BondOrder::Aromatic);
        return std::array<int, 4>{atoms, o, s, bonds};
    };
    if (aromatic_profile(g1) != aromatic_profile(g2)) return std::nullopt;

    detail::EditLevels side1(g1);
    detail::EditLevels side2(g2);
    for (int k = 0; k <= max_d; ++k) {
        // Atom counts change by at most one per edit.
        if (std::abs(g1.atom_count() - g2.atom_count()) > k) continue;
        int d1 = (k + 1) / 2;
        int d2 = k / 2;
        while (static_cast<int>(side1.levels.size()) <= d1) side1.expand();
        while (static_cast<int>(side2.levels.size()) <= d2) side2.expand();
        if (detail::levels_intersect(side1.levels[static_cast<std::size_t>(d1)],
                                     side2.levels[static_cast<std::size_t>(d2)]))
            return k;
    }
    return std::nullopt;
}

}  // namespace salsa::molgraph
