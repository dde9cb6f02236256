#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salsa/core.hpp"

namespace salsa::molgraph {

// Atom types. Other stands in for any symbol outside the supported set; it is
// produced only by lenient parsing, never by mutation sampling.
enum class Element : std::uint8_t {
    C = 0, O, N, S, Br, Cl, I, F, P, B, Other
};

inline constexpr int kNumConcreteElements = 10;

inline constexpr std::array<Element, kNumConcreteElements> kConcreteElements = {
    Element::C, Element::O, Element::N, Element::S, Element::Br,
    Element::Cl, Element::I, Element::F, Element::P, Element::B,
};

inline const char* element_symbol(Element e) {
    switch (e) {
        case Element::C: return "C";
        case Element::O: return "O";
        case Element::N: return "N";
        case Element::S: return "S";
        case Element::Br: return "Br";
        case Element::Cl: return "Cl";
        case Element::I: return "I";
        case Element::F: return "F";
        case Element::P: return "P";
        case Element::B: return "B";
        case Element::Other: return "*";
    }
    return "?";
}

// Standard atomic weights (CIAAW 2021, rounded); implicit hydrogens are added
// at 1.008 each when computing molecular weight.
inline double atomic_weight(Element e) {
    switch (e) {
        case Element::C: return 12.011;
        case Element::O: return 15.999;
        case Element::N: return 14.007;
        case Element::S: return 32.06;
        case Element::Br: return 79.904;
        case Element::Cl: return 35.45;
        case Element::I: return 126.90447;
        case Element::F: return 18.998403163;
        case Element::P: return 30.973761998;
        case Element::B: return 10.81;
        case Element::Other: return 0.0;
    }
    return 0.0;
}

inline bool aromatic_capable(Element e) {
    return e == Element::C || e == Element::N || e == Element::O || e == Element::S;
}

inline bool is_halogen(Element e) {
    return e == Element::F || e == Element::Cl || e == Element::Br || e == Element::I;
}

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Aromatic bonds count 1 toward the valence sum; the ring pi system is
// accounted separately (see pi_reservation).
inline int bond_order_value(BondOrder o) {
    switch (o) {
        case BondOrder::Single: return 1;
        case BondOrder::Double: return 2;
        case BondOrder::Triple: return 3;
        case BondOrder::Aromatic: return 1;
    }
    return 1;
}

struct AtomNode {
    Element element = Element::C;
    bool aromatic = false;
};

struct Bond {
    int a = 0;
    int b = 0;
    BondOrder order = BondOrder::Single;
};

// Allowed total valences per element. Other is unconstrained: checks skipped.
inline std::span<const int> allowed_valences(Element e) {
    static constexpr int c[] = {4};
    static constexpr int n[] = {3};
    static constexpr int o[] = {2};
    static constexpr int s[] = {2, 4, 6};
    static constexpr int p[] = {3, 5};
    static constexpr int b[] = {3};
    static constexpr int halogen[] = {1};
    switch (e) {
        case Element::C: return c;
        case Element::N: return n;
        case Element::O: return o;
        case Element::S: return s;
        case Element::P: return p;
        case Element::B: return b;
        case Element::F:
        case Element::Cl:
        case Element::Br:
        case Element::I: return halogen;
        case Element::Other: return {};
    }
    return {};
}

// Reserved valence unit for the ring pi system. Aromatic C and N contribute
// one bonding electron to the ring and lose a valence unit; aromatic O and S
// donate a lone pair instead, so no unit is consumed. Keeps furan and
// thiophene valid without full Hueckel perception.
inline int pi_reservation(Element e, bool aromatic) {
    if (!aromatic) return 0;
    return (e == Element::C || e == Element::N) ? 1 : 0;
}

// Labeled undirected molecular graph with dense atom ids 0..n-1. Hydrogens
// are implicit throughout.
class MolGraph {
  public:
    MolGraph() = default;

    int atom_count() const { return static_cast<int>(atoms_.size()); }
    int bond_count() const { return static_cast<int>(bonds_.size()); }
    const AtomNode& atom(int id) const { return atoms_.at(static_cast<std::size_t>(id)); }
    AtomNode& atom(int id) { return atoms_.at(static_cast<std::size_t>(id)); }
    const std::vector<AtomNode>& atoms() const { return atoms_; }
    const std::vector<Bond>& bonds() const { return bonds_; }

    int add_atom(Element e, bool aromatic = false) {
        atoms_.push_back({e, aromatic});
        adj_.emplace_back();
        return atom_count() - 1;
    }

    void add_bond(int a, int b, BondOrder order) {
        if (a == b) throw DataError("MolGraph: self-loop bond");
        if (a < 0 || b < 0 || a >= atom_count() || b >= atom_count())
            throw DataError("MolGraph: bond endpoint out of range");
        if (find_bond(a, b)) throw DataError("MolGraph: duplicate bond");
        bonds_.push_back({a, b, order});
        int bi = bond_count() - 1;
        adj_[static_cast<std::size_t>(a)].push_back({b, bi});
        adj_[static_cast<std::size_t>(b)].push_back({a, bi});
    }

    // (neighbor atom id, bond index) pairs.
    const std::vector<std::pair<int, int>>& neighbors(int id) const {
        return adj_.at(static_cast<std::size_t>(id));
    }

    int degree(int id) const { return static_cast<int>(neighbors(id).size()); }

    std::optional<BondOrder> find_bond(int a, int b) const {
        for (const auto& [nb, bi] : adj_.at(static_cast<std::size_t>(a)))
            if (nb == b) return bonds_[static_cast<std::size_t>(bi)].order;
        return std::nullopt;
    }

    // Valence sum at an atom: bond orders plus the aromatic pi reservation.
    int bond_order_sum(int id) const {
        int sum = pi_reservation(atom(id).element, atom(id).aromatic);
        for (const auto& [nb, bi] : neighbors(id))
            sum += bond_order_value(bonds_[static_cast<std::size_t>(bi)].order);
        return sum;
    }

    // Removes an atom and its bonds; remaining ids are re-indexed densely,
    // preserving relative order.
    void remove_atom(int id) {
        if (id < 0 || id >= atom_count()) throw DataError("MolGraph: remove_atom id out of range");
        atoms_.erase(atoms_.begin() + id);
        std::vector<Bond> kept;
        kept.reserve(bonds_.size());
        for (const Bond& b : bonds_) {
            if (b.a == id || b.b == id) continue;
            Bond nb = b;
            if (nb.a > id) --nb.a;
            if (nb.b > id) --nb.b;
            kept.push_back(nb);
        }
        bonds_ = std::move(kept);
        rebuild_adjacency();
    }

    bool connected() const {
        if (atoms_.empty()) return false;
        std::vector<char> seen(atoms_.size(), 0);
        std::vector<int> stack = {0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (const auto& [v, bi] : neighbors(u)) {
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    ++count;
                    stack.push_back(v);
                }
            }
        }
        return count == atom_count();
    }

    // Cycle rank |E| - |V| + 1 for a connected graph. Invariant under the
    // node-edit algebra: add/remove touch one atom and one bond together.
    int ring_count() const { return bond_count() - atom_count() + 1; }

  private:
    void rebuild_adjacency() {
        adj_.assign(atoms_.size(), {});
        for (int bi = 0; bi < bond_count(); ++bi) {
            const Bond& b = bonds_[static_cast<std::size_t>(bi)];
            adj_[static_cast<std::size_t>(b.a)].push_back({b.b, bi});
            adj_[static_cast<std::size_t>(b.b)].push_back({b.a, bi});
        }
    }

    std::vector<AtomNode> atoms_;
    std::vector<Bond> bonds_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
};

struct Violation {
    enum class Kind {
        Empty,
        Disconnected,
        ValenceOverflow,
        AromaticBondEndpoints,
        AromaticElement,
        DuplicateBond,
        SelfLoop,
    };
    Kind kind;
    int subject;  // atom id or bond index, -1 when whole-graph
    std::string message;
};

// Smallest allowed valence >= the bond-order sum, or nullopt on overflow.
inline std::optional<int> target_valence(Element e, int order_sum) {
    auto vals = allowed_valences(e);
    if (vals.empty()) return order_sum;  // Other: unconstrained
    for (int v : vals)
        if (v >= order_sum) return v;
    return std::nullopt;
}

// Total validity check; returns every violated invariant, empty = valid.
inline std::vector<Violation> validate(const MolGraph& g) {
    std::vector<Violation> out;
    if (g.atom_count() == 0) {
        out.push_back({Violation::Kind::Empty, -1, "graph has no atoms"});
        return out;
    }
    if (!g.connected())
        out.push_back({Violation::Kind::Disconnected, -1, "graph is not connected"});

    // Duplicate bonds / self loops cannot be built through add_bond, but a
    // hand-assembled graph may carry them.
    for (int bi = 0; bi < g.bond_count(); ++bi) {
        const Bond& b = g.bonds()[static_cast<std::size_t>(bi)];
        if (b.a == b.b)
            out.push_back({Violation::Kind::SelfLoop, bi, "self-loop bond"});
        for (int bj = bi + 1; bj < g.bond_count(); ++bj) {
            const Bond& c = g.bonds()[static_cast<std::size_t>(bj)];
            if ((c.a == b.a && c.b == b.b) || (c.a == b.b && c.b == b.a))
                out.push_back({Violation::Kind::DuplicateBond, bj, "duplicate bond"});
        }
        if (b.order == BondOrder::Aromatic &&
            !(g.atom(b.a).aromatic && g.atom(b.b).aromatic))
            out.push_back({Violation::Kind::AromaticBondEndpoints, bi,
                           "aromatic bond endpoint lacks aromatic flag"});
    }

    for (int i = 0; i < g.atom_count(); ++i) {
        const AtomNode& a = g.atom(i);
        if (a.aromatic && !aromatic_capable(a.element))
            out.push_back({Violation::Kind::AromaticElement, i,
                           std::string("aromatic flag on non-aromatic element ") +
                               element_symbol(a.element)});
        if (a.element == Element::Other) continue;  // valence check skipped
        if (!target_valence(a.element, g.bond_order_sum(i)))
            out.push_back({Violation::Kind::ValenceOverflow, i,
                           std::string("valence overflow on atom ") + std::to_string(i) +
                               " (" + element_symbol(a.element) + ")"});
    }
    return out;
}

inline bool is_valid(const MolGraph& g) { return validate(g).empty(); }

// Hydrogens needed to fill the smallest allowed valence.
inline int implicit_hydrogens(const MolGraph& g, int atom_id) {
    if (atom_id < 0 || atom_id >= g.atom_count())
        throw DataError("implicit_hydrogens: unknown atom id");
    const AtomNode& a = g.atom(atom_id);
    if (a.element == Element::Other) return 0;
    int sum = g.bond_order_sum(atom_id);
    auto tv = target_valence(a.element, sum);
    return tv ? *tv - sum : 0;
}

}  // namespace salsa::molgraph
