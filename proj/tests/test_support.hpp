#pragma once

#include <string>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/mutation.hpp"
#include "salsa/smiles.hpp"

namespace test_support {

// Random small molecule: a seed skeleton plus a few legal single edits.
inline salsa::molgraph::MolGraph random_molecule(salsa::Rng& rng, int max_heavy = 10,
                                                 int max_edits = 5) {
    using namespace salsa;
    static const std::vector<std::string> seeds = {"C",        "CC",     "CCO",
                                                   "C1CC1",    "c1ccccc1", "c1ccncc1",
                                                   "CC(C)=O",  "C#N",    "C1CCCCC1"};
    auto dist = mutation::AtomDistribution::uniform();
    // Bias toward organic composition.
    dist.probs = {0.55, 0.12, 0.12, 0.05, 0.02, 0.05, 0.01, 0.04, 0.02, 0.02};
    molgraph::MolGraph g = smiles::parse(seeds[rng.index(seeds.size())]);
    int edits = static_cast<int>(rng.index(static_cast<std::size_t>(max_edits + 1)));
    for (int e = 0; e < edits; ++e) {
        if (g.atom_count() >= max_heavy) break;
        try {
            auto [m, op] = mutation::sample_mutant(g, rng, dist);
            g = std::move(m);
        } catch (const DataError&) {
            break;
        }
    }
    return g;
}

}  // namespace test_support
