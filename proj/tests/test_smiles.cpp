#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "salsa/isomorphism.hpp"
#include "salsa/smiles.hpp"
#include "test_support.hpp"

using namespace salsa;
using namespace salsa::smiles;

TEST_CASE("vocabulary has exactly 39 stable tokens") {
    const auto& v = Vocabulary::instance();
    REQUIRE(v.size() == kVocabSize);
    REQUIRE(v.token(kPadId) == "<pad>");
    REQUIRE(v.token(kStartId) == "<s>");
    REQUIRE(v.token(kEndId) == "</s>");
    REQUIRE(v.token(kUnkId) == "<unk>");
    REQUIRE(v.id_of("Cl").has_value());
    REQUIRE(v.id_of("Br").has_value());
    std::set<std::string> uniq(v.tokens().begin(), v.tokens().end());
    REQUIRE(uniq.size() == 39);
}

TEST_CASE("parse handles the ibuprofen SMILES") {
    auto g = parse("CC(Cc1ccc(cc1)C(C(=O)O)C)C");
    REQUIRE(g.atom_count() == 15);  // 13 carbons + 2 oxygens
    int carbons = 0, aromatic = 0;
    for (const auto& a : g.atoms()) {
        carbons += (a.element == molgraph::Element::C);
        aromatic += a.aromatic;
    }
    REQUIRE(carbons == 13);
    REQUIRE(aromatic == 6);
    REQUIRE(g.ring_count() == 1);
    REQUIRE(molgraph::validate(g).empty());
}

TEST_CASE("parse single atom and ring closure") {
    auto c = parse("C");
    REQUIRE(c.atom_count() == 1);
    REQUIRE(molgraph::implicit_hydrogens(c, 0) == 4);

    auto tri = parse("C1CC1");
    molgraph::MolGraph hand;
    int a0 = hand.add_atom(molgraph::Element::C);
    int a1 = hand.add_atom(molgraph::Element::C);
    int a2 = hand.add_atom(molgraph::Element::C);
    hand.add_bond(a0, a1, molgraph::BondOrder::Single);
    hand.add_bond(a1, a2, molgraph::BondOrder::Single);
    hand.add_bond(a2, a0, molgraph::BondOrder::Single);
    REQUIRE(molgraph::is_isomorphic(tri, hand));
}

TEST_CASE("parse error paths") {
    REQUIRE_THROWS_AS(parse("C(C"), DataError);     // unmatched parenthesis
    REQUIRE_THROWS_AS(parse("C1CC"), DataError);    // unmatched ring closure
    REQUIRE_THROWS_AS(parse("CC)C"), DataError);    // stray ')'
    REQUIRE_THROWS_AS(parse("C="), DataError);      // dangling bond
    REQUIRE_THROWS_AS(parse(""), DataError);        // empty
    REQUIRE_THROWS_AS(parse("CZ"), DataError);      // unknown symbol, strict
    REQUIRE_THROWS_AS(parse("C(F)(F)(F)(F)F"), DataError);  // valence overflow
    REQUIRE_THROWS_AS(parse("[Si]C"), DataError);   // unsupported bracket, strict
}

TEST_CASE("lenient parse maps unknown symbols to Other") {
    ParseOptions lenient{.strict = false};
    auto g = parse("C[Si]C", lenient);
    REQUIRE(g.atom_count() == 3);
    int others = 0;
    for (const auto& a : g.atoms()) others += (a.element == molgraph::Element::Other);
    REQUIRE(others == 1);
    REQUIRE(molgraph::validate(g).empty());
}

TEST_CASE("bracket hydrogens are accepted and stay implicit") {
    auto g = parse("c1cc[nH]c1");
    REQUIRE(g.atom_count() == 5);
    REQUIRE(molgraph::validate(g).empty());
    auto h = parse("C[NH2]");
    REQUIRE(h.atom_count() == 2);
}

TEST_CASE("canonical writer is traversal invariant") {
    REQUIRE(write(parse("OCC")) == write(parse("CCO")));
    REQUIRE(write(parse("C")) == "C");
    REQUIRE(canonicalize("C(C)(C)C") == canonicalize("CC(C)C"));
}

TEST_CASE("benzene canonical form is rotation invariant") {
    std::string ref = write(parse("c1ccccc1"));
    // All rotations of the ring produce the same string through parse+write.
    for (int rot = 0; rot < 6; ++rot) {
        molgraph::MolGraph g;
        std::vector<int> ids;
        for (int i = 0; i < 6; ++i) ids.push_back(g.add_atom(molgraph::Element::C, true));
        for (int i = 0; i < 6; ++i) {
            int a = ids[static_cast<std::size_t>((i + rot) % 6)];
            int b = ids[static_cast<std::size_t>((i + 1 + rot) % 6)];
            g.add_bond(a, b, molgraph::BondOrder::Aromatic);
        }
        REQUIRE(write(g) == ref);
    }
}

TEST_CASE("canonical form is invariant under random atom permutation") {
    Rng rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        auto g = test_support::random_molecule(rng, 10, 4);
        std::string ref = write(g);
        // Rebuild with permuted atom ids.
        std::vector<int> perm(static_cast<std::size_t>(g.atom_count()));
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        rng.shuffle(perm);
        molgraph::MolGraph permuted;
        std::vector<int> slot(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) slot[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
        std::vector<std::pair<int, bool>> atoms(perm.size());
        for (int i = 0; i < g.atom_count(); ++i)
            atoms[static_cast<std::size_t>(slot[static_cast<std::size_t>(i)])] = {
                static_cast<int>(g.atom(i).element), g.atom(i).aromatic};
        for (const auto& [el, ar] : atoms)
            permuted.add_atom(static_cast<molgraph::Element>(el), ar);
        for (const auto& b : g.bonds())
            permuted.add_bond(slot[static_cast<std::size_t>(b.a)],
                              slot[static_cast<std::size_t>(b.b)], b.order);
        REQUIRE(write(permuted) == ref);
    }
}

TEST_CASE("round trip: parse(write(g)) is isomorphic to g") {
    Rng rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = test_support::random_molecule(rng, 11, 5);
        auto back = parse(write(g));
        REQUIRE(molgraph::is_isomorphic(g, back));
    }
}

TEST_CASE("aromatic single bonds round trip explicitly") {
    // Biphenyl: single bond between two aromatic atoms must survive.
    auto g = parse("c1ccccc1-c1ccccc1");
    REQUIRE(g.atom_count() == 12);
    int singles = 0;
    for (const auto& b : g.bonds())
        singles += (b.order == molgraph::BondOrder::Single);
    REQUIRE(singles == 1);
    auto back = parse(write(g));
    REQUIRE(molgraph::is_isomorphic(g, back));
}

TEST_CASE("tokenize uses greedy longest match") {
    const auto& v = Vocabulary::instance();
    auto seq = tokenize("CCl");
    REQUIRE(seq.size() == 4);
    REQUIRE(seq[0] == kStartId);
    REQUIRE(seq[1] == *v.id_of("C"));
    REQUIRE(seq[2] == *v.id_of("Cl"));
    REQUIRE(seq[3] == kEndId);

    REQUIRE(tokenize("") == TokenSequence{kStartId, kEndId});

    auto pct = tokenize("C%10CC%10");
    std::vector<std::string> toks;
    for (int id : pct) toks.push_back(v.token(id));
    REQUIRE(toks == std::vector<std::string>{"<s>", "C", "%", "1", "0", "C", "C", "%", "1",
                                             "0", "</s>"});
}

TEST_CASE("unknown characters tokenize to UNK") {
    auto seq = tokenize("C$C");
    REQUIRE(seq[2] == kUnkId);
    REQUIRE(detokenize(seq) == "C?C");
}

TEST_CASE("tokenizer round trips on canonical strings") {
    Rng rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = test_support::random_molecule(rng, 10, 4);
        std::string canon = write(g);
        REQUIRE(detokenize(tokenize(canon)) == canon);
        for (int id : tokenize(canon)) REQUIRE(id < kVocabSize);
    }
}
