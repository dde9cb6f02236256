#pragma once

#include <algorithm>
#include <vector>

#include "salsa/molgraph.hpp"

namespace salsa::molgraph {

namespace detail {

// Per-atom label used for candidate pruning: element, aromatic flag, degree
// and the multiset of incident bond orders.
struct AtomKey {
    int element;
    bool aromatic;
    int degree;
    std::array<int, 4> order_counts;  // single/double/triple/aromatic

    bool operator==(const AtomKey&) const = default;
    bool operator<(const AtomKey& o) const {
        return std::tie(element, aromatic, degree, order_counts) <
               std::tie(o.element, o.aromatic, o.degree, o.order_counts);
    }
};

inline AtomKey atom_key(const MolGraph& g, int id) {
    AtomKey k{static_cast<int>(g.atom(id).element), g.atom(id).aromatic, g.degree(id), {0, 0, 0, 0}};
    for (const auto& [nb, bi] : g.neighbors(id)) {
        BondOrder o = g.bonds()[static_cast<std::size_t>(bi)].order;
        ++k.order_counts[static_cast<std::size_t>(static_cast<int>(o) - 1)];
    }
    return k;
}

struct IsoState {
    const MolGraph* g1;
    const MolGraph* g2;
    std::vector<int> map12;   // g1 atom -> g2 atom or -1
    std::vector<char> used2;  // g2 atom already mapped
    std::vector<AtomKey> keys1, keys2;
    std::vector<int> order;  // g1 atoms in match order (connected expansion)

    bool extend(std::size_t pos) {
        if (pos == order.size()) return true;
        int u = order[pos];
        for (int v = 0; v < g2->atom_count(); ++v) {
            if (used2[static_cast<std::size_t>(v)]) continue;
            if (!(keys1[static_cast<std::size_t>(u)] == keys2[static_cast<std::size_t>(v)])) continue;
            bool ok = true;
            // Every already-mapped neighbor of u must be a neighbor of v with
            // the same bond order, and vice versa counts match by degree.
            for (const auto& [nb, bi] : g1->neighbors(u)) {
                int m = map12[static_cast<std::size_t>(nb)];
                if (m < 0) continue;
                auto o2 = g2->find_bond(v, m);
                if (!o2 || *o2 != g1->bonds()[static_cast<std::size_t>(bi)].order) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            // Reverse check: mapped neighbors of v must be images of
            // neighbors of u.
            for (const auto& [nb2, bi2] : g2->neighbors(v)) {
                (void)bi2;
                if (!used2[static_cast<std::size_t>(nb2)]) continue;
                // find preimage
                int pre = -1;
                for (std::size_t i = 0; i < map12.size(); ++i)
                    if (map12[i] == nb2) {
                        pre = static_cast<int>(i);
                        break;
                    }
                if (pre >= 0 && !g1->find_bond(u, pre)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            map12[static_cast<std::size_t>(u)] = v;
            used2[static_cast<std::size_t>(v)] = 1;
            if (extend(pos + 1)) return true;
            map12[static_cast<std::size_t>(u)] = -1;
            used2[static_cast<std::size_t>(v)] = 0;
        }
        return false;
    }
};

}  // namespace detail

// Exact labeled-graph isomorphism: a bijection preserving element, aromatic
// flag, adjacency and bond order. Backtracking with label/degree pruning;
// intended for the small graphs this toolkit manipulates.
inline bool is_isomorphic(const MolGraph& g1, const MolGraph& g2) {
    if (g1.atom_count() != g2.atom_count() || g1.bond_count() != g2.bond_count())
        return false;
    if (g1.atom_count() == 0) return true;

    detail::IsoState st;
    st.g1 = &g1;
    st.g2 = &g2;
    st.keys1.reserve(static_cast<std::size_t>(g1.atom_count()));
    st.keys2.reserve(static_cast<std::size_t>(g2.atom_count()));
    for (int i = 0; i < g1.atom_count(); ++i) st.keys1.push_back(detail::atom_key(g1, i));
    for (int i = 0; i < g2.atom_count(); ++i) st.keys2.push_back(detail::atom_key(g2, i));

    // Sorted label multisets must agree.
    auto s1 = st.keys1;
    auto s2 = st.keys2;
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());
    if (s1 != s2) return false;

    // Match order: BFS from the rarest label so the partial map stays
    // connected and prunes early.
    std::vector<int> label_count(st.keys1.size(), 0);
    for (std::size_t i = 0; i < st.keys1.size(); ++i)
        for (std::size_t j = 0; j < st.keys1.size(); ++j)
            if (st.keys1[i] == st.keys1[j]) ++label_count[i];
    int start = 0;
    for (std::size_t i = 1; i < label_count.size(); ++i)
        if (label_count[i] < label_count[static_cast<std::size_t>(start)]) start = static_cast<int>(i);

    std::vector<char> seen(static_cast<std::size_t>(g1.atom_count()), 0);
    std::vector<int> queue = {start};
    seen[static_cast<std::size_t>(start)] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        int u = queue[qi];
        st.order.push_back(u);
        for (const auto& [v, bi] : g1.neighbors(u)) {
            (void)bi;
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                queue.push_back(v);
            }
        }
    }
    if (st.order.size() != static_cast<std::size_t>(g1.atom_count()))
        return false;  // g1 disconnected and g2 connected-size-equal: handled by search anyway

    st.map12.assign(static_cast<std::size_t>(g1.atom_count()), -1);
    st.used2.assign(static_cast<std::size_t>(g2.atom_count()), 0);
    return st.extend(0);
}

}  // namespace salsa::molgraph
