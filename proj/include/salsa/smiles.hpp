#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/molgraph.hpp"

namespace salsa::smiles {

using molgraph::Bond;
using molgraph::BondOrder;
using molgraph::Element;
using molgraph::MolGraph;

// Anchor filter: surface form limited to 110 characters, which with the
// START/END wrapping gives 112 token positions.
inline constexpr int kMaxSurfaceLen = 110;
inline constexpr int kMaxTokenPositions = 112;

// ---------------------------------------------------------------------------
// Vocabulary: 4 specials + 35 surface tokens, ids stable and contiguous.
// ---------------------------------------------------------------------------

inline constexpr int kVocabSize = 39;
inline constexpr int kPadId = 0;
inline constexpr int kStartId = 1;
inline constexpr int kEndId = 2;
inline constexpr int kUnkId = 3;

class Vocabulary {
  public:
    static const Vocabulary& instance() {
        static const Vocabulary v;
        return v;
    }

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::optional<int> id_of(std::string_view tok) const {
        auto it = map_.find(std::string(tok));
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    // File form: one token per line, line number = id.
    std::string file_contents() const {
        std::string out;
        for (const auto& t : tokens_) {
            out += t;
            out += '\n';
        }
        return out;
    }

    std::uint64_t checksum() const { return fnv1a64(file_contents()); }

  private:
    Vocabulary() {
        tokens_ = {"<pad>", "<s>", "</s>", "<unk>",
                   "C", "N", "O", "S", "P", "B", "F", "Cl", "Br", "I",
                   "c", "n", "o", "s",
                   "[", "]", "H", "=", "#", "-", "/", "\\", "(", ")", "%",
                   "0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};
        for (std::size_t i = 0; i < tokens_.size(); ++i)
            map_[tokens_[i]] = static_cast<int>(i);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> map_;
};

using TokenSequence = std::vector<int>;

// Greedy longest-match over the vocabulary; two-character atoms (Cl, Br)
// never split. Unknown characters absorb into UNK.
inline TokenSequence tokenize(std::string_view s) {
    const Vocabulary& v = Vocabulary::instance();
    TokenSequence out;
    out.reserve(s.size() + 2);
    out.push_back(kStartId);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size()) {
            if (auto id = v.id_of(s.substr(i, 2)); id) {
                out.push_back(*id);
                i += 2;
                continue;
            }
        }
        if (auto id = v.id_of(s.substr(i, 1)); id) {
            out.push_back(*id);
        } else {
            out.push_back(kUnkId);
        }
        ++i;
    }
    out.push_back(kEndId);
    return out;
}

// Inverse of tokenize on the supported alphabet; specials stripped, UNK
// rendered as '?'.
inline std::string detokenize(const TokenSequence& seq) {
    const Vocabulary& v = Vocabulary::instance();
    std::string out;
    for (int id : seq) {
        if (id == kPadId || id == kStartId || id == kEndId) continue;
        if (id == kUnkId) {
            out += '?';
            continue;
        }
        out += v.token(id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct ParseOptions {
    // Strict mode rejects unknown atom symbols and unsupported bracket
    // contents; lenient mode maps them to Element::Other.
    bool strict = true;
};

namespace detail {

struct PendingRing {
    int atom = -1;
    std::optional<BondOrder> order;
};

inline std::optional<std::pair<Element, bool>> atom_from_symbol(std::string_view sym) {
    // Two-character atoms first.
    if (sym == "Cl") return {{Element::Cl, false}};
    if (sym == "Br") return {{Element::Br, false}};
    if (sym.size() != 1) return std::nullopt;
    switch (sym[0]) {
        case 'C': return {{Element::C, false}};
        case 'N': return {{Element::N, false}};
        case 'O': return {{Element::O, false}};
        case 'S': return {{Element::S, false}};
        case 'P': return {{Element::P, false}};
        case 'B': return {{Element::B, false}};
        case 'F': return {{Element::F, false}};
        case 'I': return {{Element::I, false}};
        case 'c': return {{Element::C, true}};
        case 'n': return {{Element::N, true}};
        case 'o': return {{Element::O, true}};
        case 's': return {{Element::S, true}};
        default: return std::nullopt;
    }
}

}  // namespace detail

// Parses the supported SMILES grammar into a validated MolGraph: atoms from
// the 10-element set plus aromatic lowercase, branches, ring closures
// (digits and %nn), bond symbols = # - / \, and minimal [nH]-style brackets.
// Explicit bracket hydrogen counts are not stored; hydrogens stay implicit.
inline MolGraph parse(std::string_view s, ParseOptions opts = {}) {
    if (s.empty()) throw DataError("parse: empty SMILES");
    MolGraph g;
    int prev = -1;
    std::optional<BondOrder> pending;
    std::vector<int> branch_stack;
    std::map<int, detail::PendingRing> open_rings;

    auto attach = [&](Element e, bool aromatic) {
        int id = g.add_atom(e, aromatic);
        if (prev >= 0) {
            BondOrder order;
            if (pending) {
                order = *pending;
            } else {
                order = (g.atom(prev).aromatic && aromatic) ? BondOrder::Aromatic
                                                            : BondOrder::Single;
            }
            g.add_bond(prev, id, order);
            pending.reset();
        } else if (pending) {
            throw DataError("parse: bond symbol before any atom");
        }
        prev = id;
    };

    auto close_or_open_ring = [&](int num) {
        if (prev < 0) throw DataError("parse: ring closure before any atom");
        auto it = open_rings.find(num);
        if (it == open_rings.end()) {
            open_rings[num] = {prev, pending};
            pending.reset();
            return;
        }
        detail::PendingRing r = it->second;
        open_rings.erase(it);
        if (r.atom == prev) throw DataError("parse: ring closure to the same atom");
        BondOrder order;
        if (pending && r.order && *pending != *r.order)
            throw DataError("parse: conflicting ring-closure bond orders");
        if (pending)
            order = *pending;
        else if (r.order)
            order = *r.order;
        else
            order = (g.atom(prev).aromatic && g.atom(r.atom).aromatic) ? BondOrder::Aromatic
                                                                       : BondOrder::Single;
        g.add_bond(r.atom, prev, order);
        pending.reset();
    };

    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '(') {
            if (prev < 0) throw DataError("parse: branch before any atom");
            if (pending) throw DataError("parse: dangling bond symbol before '('");
            branch_stack.push_back(prev);
            ++i;
        } else if (c == ')') {
            if (branch_stack.empty()) throw DataError("parse: unmatched ')'");
            if (pending) throw DataError("parse: dangling bond symbol before ')'");
            prev = branch_stack.back();
            branch_stack.pop_back();
            ++i;
        } else if (c == '=' || c == '#' || c == '-' || c == '/' || c == '\\') {
            if (pending) throw DataError("parse: consecutive bond symbols");
            // Cis/trans markers carry no geometry in this model; they denote
            // single bonds.
            pending = (c == '=') ? BondOrder::Double
                      : (c == '#') ? BondOrder::Triple
                                   : BondOrder::Single;
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            close_or_open_ring(c - '0');
            ++i;
        } else if (c == '%') {
            if (i + 2 >= s.size() + 1 || i + 2 > s.size() ||
                !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
                !std::isdigit(static_cast<unsigned char>(s[i + 2])))
                throw DataError("parse: '%' must be followed by two digits");
            close_or_open_ring((s[i + 1] - '0') * 10 + (s[i + 2] - '0'));
            i += 3;
        } else if (c == '[') {
            std::size_t end = s.find(']', i);
            if (end == std::string_view::npos) throw DataError("parse: unmatched '['");
            std::string_view body = s.substr(i + 1, end - i - 1);
            // Supported bracket forms: [E], [EH], [EHn]. The H count is
            // accepted but not stored (hydrogens stay implicit).
            std::optional<std::pair<Element, bool>> atom;
            std::string_view rest;
            if (body.size() >= 2 && detail::atom_from_symbol(body.substr(0, 2))) {
                atom = detail::atom_from_symbol(body.substr(0, 2));
                rest = body.substr(2);
            } else if (!body.empty() && detail::atom_from_symbol(body.substr(0, 1))) {
                atom = detail::atom_from_symbol(body.substr(0, 1));
                rest = body.substr(1);
            }
            bool supported = atom.has_value();
            if (supported && !rest.empty()) {
                if (rest[0] != 'H') {
                    supported = false;
                } else {
                    rest.remove_prefix(1);
                    if (rest.size() > 1 ||
                        (rest.size() == 1 && !std::isdigit(static_cast<unsigned char>(rest[0]))))
                        supported = false;
                }
            }
            if (supported) {
                attach(atom->first, atom->second);
            } else if (opts.strict) {
                throw DataError("parse: unsupported bracket atom [" + std::string(body) + "]");
            } else {
                attach(Element::Other, false);
            }
            i = end + 1;
        } else {
            std::optional<std::pair<Element, bool>> atom;
            if (i + 1 < s.size()) atom = detail::atom_from_symbol(s.substr(i, 2));
            std::size_t consumed = 2;
            if (!atom) {
                atom = detail::atom_from_symbol(s.substr(i, 1));
                consumed = 1;
            }
            if (atom) {
                attach(atom->first, atom->second);
            } else if (opts.strict) {
                throw DataError(std::string("parse: unknown atom symbol '") + c + "'");
            } else {
                attach(Element::Other, false);
                consumed = 1;
            }
            i += consumed;
        }
    }

    if (!branch_stack.empty()) throw DataError("parse: unmatched '('");
    if (!open_rings.empty()) throw DataError("parse: unmatched ring-closure digit");
    if (pending) throw DataError("parse: dangling bond symbol at end of input");
    if (g.atom_count() == 0) throw DataError("parse: no atoms");

    auto violations = molgraph::validate(g);
    if (!violations.empty())
        throw DataError("parse: invalid molecule: " + violations.front().message);
    return g;
}

// ---------------------------------------------------------------------------
// Canonical writer
// ---------------------------------------------------------------------------

namespace detail {

// One round of neighborhood refinement: signature = (own rank, sorted
// multiset of (bond order, neighbor rank)). Returns dense ranks.
inline std::vector<int> refine_ranks(const MolGraph& g, std::vector<int> ranks) {
    const int n = g.atom_count();
    int classes = static_cast<int>(std::vector<int>(ranks).size());
    auto count_classes = [](const std::vector<int>& r) {
        std::vector<int> c = r;
        std::sort(c.begin(), c.end());
        return static_cast<int>(std::unique(c.begin(), c.end()) - c.begin());
    };
    classes = count_classes(ranks);
    while (true) {
        std::vector<std::pair<std::vector<int>, int>> sigs(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<int> sig;
            sig.push_back(ranks[static_cast<std::size_t>(i)]);
            std::vector<std::pair<int, int>> nb;
            for (const auto& [v, bi] : g.neighbors(i))
                nb.push_back({static_cast<int>(g.bonds()[static_cast<std::size_t>(bi)].order),
                              ranks[static_cast<std::size_t>(v)]});
            std::sort(nb.begin(), nb.end());
            for (auto& [o, r] : nb) {
                sig.push_back(o);
                sig.push_back(r);
            }
            sigs[static_cast<std::size_t>(i)] = {std::move(sig), i};
        }
        std::vector<std::pair<std::vector<int>, int>> sorted = sigs;
        std::sort(sorted.begin(), sorted.end());
        std::vector<int> next(static_cast<std::size_t>(n));
        int rank = 0;
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            if (k > 0 && sorted[k].first != sorted[k - 1].first) ++rank;
            next[static_cast<std::size_t>(sorted[k].second)] = rank;
        }
        int next_classes = count_classes(next);
        if (next_classes == classes) return next;
        classes = next_classes;
        ranks = std::move(next);
    }
}

inline std::vector<int> initial_ranks(const MolGraph& g) {
    const int n = g.atom_count();
    std::vector<std::pair<std::vector<int>, int>> inv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::array<int, 4> oc{0, 0, 0, 0};
        for (const auto& [v, bi] : g.neighbors(i)) {
            (void)v;
            ++oc[static_cast<std::size_t>(
                static_cast<int>(g.bonds()[static_cast<std::size_t>(bi)].order) - 1)];
        }
        inv[static_cast<std::size_t>(i)] = {
            {static_cast<int>(g.atom(i).element), g.atom(i).aromatic ? 1 : 0, g.degree(i),
             oc[0], oc[1], oc[2], oc[3], molgraph::implicit_hydrogens(g, i)},
            i};
    }
    auto sorted = inv;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> ranks(static_cast<std::size_t>(n));
    int rank = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (k > 0 && sorted[k].first != sorted[k - 1].first) ++rank;
        ranks[static_cast<std::size_t>(sorted[k].second)] = rank;
    }
    return refine_ranks(g, std::move(ranks));
}

inline bool ranks_discrete(const std::vector<int>& ranks) {
    std::vector<int> c = ranks;
    std::sort(c.begin(), c.end());
    return std::adjacent_find(c.begin(), c.end()) == c.end();
}

struct RingClosure {
    int bond_index;
    int open_atom;   // earlier in DFS preorder
    int close_atom;  // later in DFS preorder
    int digit;
};

inline std::string bond_symbol(const MolGraph& g, const Bond& b) {
    switch (b.order) {
        case BondOrder::Single:
            // Explicit '-' between two aromatic atoms, otherwise implied
            // aromatic on re-parse.
            return (g.atom(b.a).aromatic && g.atom(b.b).aromatic) ? "-" : "";
        case BondOrder::Double: return "=";
        case BondOrder::Triple: return "#";
        case BondOrder::Aromatic: return "";
    }
    return "";
}

inline std::string atom_symbol_out(const MolGraph& g, int id) {
    const auto& a = g.atom(id);
    if (a.element == Element::Other) return "*";
    std::string sym = molgraph::element_symbol(a.element);
    if (a.aromatic) {
        for (char& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return sym;
}

inline std::string ring_digit_token(int digit) {
    if (digit <= 9) return std::string(1, static_cast<char>('0' + digit));
    return "%" + std::to_string(digit);
}

// Emits a SMILES string following discrete canonical ranks: DFS from the
// minimal-rank atom, children in ascending rank order, ring-closure digits
// assigned in preorder.
inline std::string emit(const MolGraph& g, const std::vector<int>& ranks) {
    const int n = g.atom_count();
    int root = 0;
    for (int i = 1; i < n; ++i)
        if (ranks[static_cast<std::size_t>(i)] < ranks[static_cast<std::size_t>(root)]) root = i;

    // Pass 1: classify tree vs ring-closure edges following the canonical
    // child order, record preorder positions.
    std::vector<int> preorder(static_cast<std::size_t>(n), -1);
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<std::pair<int, int>>> tree_children(
        static_cast<std::size_t>(n));  // (child, bond index)
    std::vector<RingClosure> closures;
    int counter = 0;

    auto sorted_neighbors = [&](int u) {
        auto nbs = g.neighbors(u);
        std::sort(nbs.begin(), nbs.end(), [&](const auto& x, const auto& y) {
            return ranks[static_cast<std::size_t>(x.first)] <
                   ranks[static_cast<std::size_t>(y.first)];
        });
        return nbs;
    };

    struct Frame {
        int atom;
        int parent_bond;
        std::vector<std::pair<int, int>> nbs;
        std::size_t next = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({root, -1, sorted_neighbors(root)});
    visited[static_cast<std::size_t>(root)] = 1;
    preorder[static_cast<std::size_t>(root)] = counter++;
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next >= f.nbs.size()) {
            stack.pop_back();
            continue;
        }
        auto [v, bi] = f.nbs[f.next++];
        if (bi == f.parent_bond) continue;
        if (visited[static_cast<std::size_t>(v)]) {
            // Back edge; the closing endpoint is the current atom.
            bool already = false;
            for (const auto& c : closures) already = already || c.bond_index == bi;
            if (!already)
                closures.push_back({bi, v, f.atom, 0});
            continue;
        }
        visited[static_cast<std::size_t>(v)] = 1;
        preorder[static_cast<std::size_t>(v)] = counter++;
        tree_children[static_cast<std::size_t>(f.atom)].push_back({v, bi});
        stack.push_back({v, bi, sorted_neighbors(v)});
    }

    // Digits ordered by (opening preorder, closing preorder); no reuse.
    std::sort(closures.begin(), closures.end(), [&](const RingClosure& a, const RingClosure& b) {
        auto ka = std::pair(preorder[static_cast<std::size_t>(a.open_atom)],
                            preorder[static_cast<std::size_t>(a.close_atom)]);
        auto kb = std::pair(preorder[static_cast<std::size_t>(b.open_atom)],
                            preorder[static_cast<std::size_t>(b.close_atom)]);
        return ka < kb;
    });
    for (std::size_t k = 0; k < closures.size(); ++k)
        closures[k].digit = static_cast<int>(k) + 1;

    std::vector<std::vector<const RingClosure*>> ring_at(static_cast<std::size_t>(n));
    for (const auto& c : closures) {
        ring_at[static_cast<std::size_t>(c.open_atom)].push_back(&c);
        ring_at[static_cast<std::size_t>(c.close_atom)].push_back(&c);
    }
    for (auto& lst : ring_at)
        std::sort(lst.begin(), lst.end(),
                  [](const RingClosure* a, const RingClosure* b) { return a->digit < b->digit; });

    // Pass 2: build the string.
    std::string out;
    struct EmitFrame {
        int atom;
        std::vector<std::pair<int, int>> kids;
        std::size_t next = 0;
        bool wrapped = false;  // current child printed inside parentheses
    };
    auto print_atom = [&](int u) {
        out += atom_symbol_out(g, u);
        for (const RingClosure* c : ring_at[static_cast<std::size_t>(u)]) {
            if (c->close_atom == u)
                out += bond_symbol(g, g.bonds()[static_cast<std::size_t>(c->bond_index)]);
            out += ring_digit_token(c->digit);
        }
    };

    std::vector<EmitFrame> estack;
    print_atom(root);
    estack.push_back({root, tree_children[static_cast<std::size_t>(root)]});
    while (!estack.empty()) {
        EmitFrame& f = estack.back();
        if (f.wrapped) {
            out += ')';
            f.wrapped = false;
        }
        if (f.next >= f.kids.size()) {
            estack.pop_back();
            continue;
        }
        auto [v, bi] = f.kids[f.next++];
        bool last = f.next == f.kids.size();
        if (!last) {
            out += '(';
            f.wrapped = true;
        }
        out += bond_symbol(g, g.bonds()[static_cast<std::size_t>(bi)]);
        print_atom(v);
        estack.push_back({v, tree_children[static_cast<std::size_t>(v)]});
    }
    return out;
}

// Individualization cap; beyond it the minimum over explored leaves is kept.
// Drug-scale molecules stay far below this.
inline constexpr int kMaxCanonLeaves = 20000;

inline void explore_ranks(const MolGraph& g, const std::vector<int>& ranks, int& leaves,
                          std::optional<std::string>& best) {
    if (leaves >= kMaxCanonLeaves) return;
    if (ranks_discrete(ranks)) {
        ++leaves;
        std::string s = emit(g, ranks);
        if (!best || s < *best) best = std::move(s);
        return;
    }
    // Split the lowest-ranked tied class by individualizing each member.
    int target_rank = -1;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        int r = ranks[i];
        int count = 0;
        for (int rr : ranks) count += (rr == r);
        if (count > 1 && (target_rank < 0 || r < target_rank)) target_rank = r;
    }
    for (std::size_t a = 0; a < ranks.size(); ++a) {
        if (ranks[a] != target_rank) continue;
        std::vector<int> forced(ranks.size());
        for (std::size_t i = 0; i < ranks.size(); ++i)
            forced[i] = ranks[i] * 2 + ((i == a) ? 0 : 1);
        explore_ranks(g, refine_ranks(g, std::move(forced)), leaves, best);
    }
}

}  // namespace detail

// Canonical atom ranks by iterative neighborhood refinement; tied classes are
// individualized and the lexicographically minimal emission wins.
inline std::string write(const MolGraph& g) {
    auto violations = molgraph::validate(g);
    if (!violations.empty())
        throw DataError("write: invalid molecule: " + violations.front().message);
    std::vector<int> ranks = detail::initial_ranks(g);
    std::optional<std::string> best;
    int leaves = 0;
    detail::explore_ranks(g, ranks, leaves, best);
    return *best;
}

inline std::string canonicalize(std::string_view s, ParseOptions opts = {}) {
    return write(parse(s, opts));
}

}  // namespace salsa::smiles
