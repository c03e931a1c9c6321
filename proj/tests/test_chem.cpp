#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "geodeg/chem.hpp"
#include "oracles.hpp"

using namespace geodeg::chem;

TEST_CASE("parse simple chains") {
    auto g = parse_smiles("CCO");
    REQUIRE(g.atoms.size() == 3);
    CHECK(g.atoms[0].element == "C");
    CHECK(g.atoms[1].element == "C");
    CHECK(g.atoms[2].element == "O");
    REQUIRE(g.bonds.size() == 2);
    CHECK(g.bonds[0].order == BondOrder::single);
    CHECK(g.bonds[1].order == BondOrder::single);
}

TEST_CASE("parse benzene") {
    auto g = parse_smiles("c1ccccc1");
    REQUIRE(g.atoms.size() == 6);
    for (const auto& a : g.atoms) {
        CHECK(a.element == "C");
        CHECK(a.aromatic);
    }
    REQUIRE(g.bonds.size() == 6);
    for (const auto& b : g.bonds) CHECK(b.order == BondOrder::aromatic);
    // 6-cycle: every atom has degree 2
    for (const auto& nb : g.adjacency()) CHECK(nb.size() == 2);
}

TEST_CASE("parse branches, bonds, brackets") {
    auto iso = parse_smiles("CC(C)C");
    CHECK(iso.atoms.size() == 4);
    CHECK(iso.adjacency()[1].size() == 3);

    auto acetic = parse_smiles("CC(=O)O");
    REQUIRE(acetic.bonds.size() == 3);
    CHECK(acetic.bonds[1].order == BondOrder::double_);

    auto acetylene = parse_smiles("C#C");
    CHECK(acetylene.bonds[0].order == BondOrder::triple);

    auto acetate = parse_smiles("CC(=O)[O-]");
    CHECK(acetate.atoms[3].formal_charge == -1);
    auto ammonium = parse_smiles("[NH4+]");
    CHECK(ammonium.atoms.size() == 1);  // hydrogens not materialized
    CHECK(ammonium.atoms[0].formal_charge == 1);
    auto doubly = parse_smiles("[O-2]");
    CHECK(doubly.atoms[0].formal_charge == -2);
    auto pyrrole = parse_smiles("c1cc[nH]c1");
    CHECK(pyrrole.atoms[3].element == "N");
    CHECK(pyrrole.atoms[3].aromatic);

    auto chloride = parse_smiles("CCCl");
    CHECK(chloride.atoms[2].element == "Cl");
    auto bromide = parse_smiles("CBr");
    CHECK(bromide.atoms[1].element == "Br");
}

TEST_CASE("parse errors carry byte offsets") {
    CHECK_THROWS_AS(parse_smiles(""), ParseError);
    CHECK_THROWS_AS(parse_smiles("C1CC"), ParseError);       // unclosed ring bond
    CHECK_THROWS_AS(parse_smiles("CC.O"), ParseError);       // dot-separated
    CHECK_THROWS_AS(parse_smiles("CXe"), ParseError);        // unsupported element
    CHECK_THROWS_AS(parse_smiles("C(C"), ParseError);        // unclosed branch
    CHECK_THROWS_AS(parse_smiles("C)C"), ParseError);        // unmatched ')'
    CHECK_THROWS_AS(parse_smiles("C="), ParseError);         // dangling bond
    CHECK_THROWS_AS(parse_smiles("C==C"), ParseError);       // duplicate bond symbol
    CHECK_THROWS_AS(parse_smiles("[13C]"), ParseError);      // isotope
    CHECK_THROWS_AS(parse_smiles("F/C=C/F"), ParseError);    // stereo
    CHECK_THROWS_AS(parse_smiles("C11"), ParseError);        // self ring bond
    try {
        parse_smiles("C1CC");
    } catch (const ParseError& e) {
        CHECK(e.offset == 1);
        CHECK(std::string(e.what()).find("unclosed ring bond 1") != std::string::npos);
    }
}

TEST_CASE("ring perception") {
    CHECK(perceive_rings(parse_smiles("CCO")).empty());

    auto triangle = perceive_rings(parse_smiles("C1CC1"));
    REQUIRE(triangle.size() == 1);
    CHECK(triangle[0] == std::vector<int>{0, 1, 2});

    // naphthalene: two 6-cycles sharing 2 atoms, checked against the
    // exhaustive cycle-space oracle
    auto g = parse_smiles("c1ccc2ccccc2c1");
    auto rings = perceive_rings(g);
    auto expect = oracles::min_cycle_basis_exhaustive(g);
    REQUIRE(rings.size() == 2);
    CHECK(rings == expect);
    CHECK(rings[0].size() == 6);
    CHECK(rings[1].size() == 6);
    std::set<int> shared;
    for (int v : rings[0])
        if (std::count(rings[1].begin(), rings[1].end(), v)) shared.insert(v);
    CHECK(shared.size() == 2);
}

TEST_CASE("ring perception matches exhaustive oracle on assorted molecules") {
    for (const char* smiles :
         {"C1CC1", "C1CCCCC1", "c1ccc2ccccc2c1", "C1CC2CCC1CC2", "C1CCC2(CC1)CCCC2",
          "c1ccc(cc1)C2CCCC2", "CC1CCCCC1C", "C1CC1C1CC1"}) {
        auto g = parse_smiles(smiles);
        CAPTURE(smiles);
        CHECK(perceive_rings(g) == oracles::min_cycle_basis_exhaustive(g));
    }
}

TEST_CASE("to_hypergraph") {
    auto h1 = to_hypergraph(parse_smiles("CCO"));
    CHECK(h1.atoms.size() == 3);
    REQUIRE(h1.hyperedges.size() == 2);
    for (const auto& e : h1.hyperedges) CHECK(e.kind == HyperedgeKind::bond);

    auto h2 = to_hypergraph(parse_smiles("c1ccccc1"));
    CHECK(h2.atoms.size() == 6);
    REQUIRE(h2.hyperedges.size() == 1);
    CHECK(h2.hyperedges[0].kind == HyperedgeKind::ring);
    CHECK(h2.hyperedges[0].members.size() == 6);

    auto h3 = to_hypergraph(parse_smiles("C1CC1C"));
    CHECK(h3.atoms.size() == 4);
    REQUIRE(h3.hyperedges.size() == 2);
    CHECK(h3.hyperedges[0].kind == HyperedgeKind::ring);
    CHECK(h3.hyperedges[0].members == std::vector<int>{0, 1, 2});
    CHECK(h3.hyperedges[1].kind == HyperedgeKind::bond);
    CHECK(h3.hyperedges[1].members == std::vector<int>{2, 3});
}

TEST_CASE("cycle-space dimension property") {
    for (const char* smiles : {"CCO", "C1CC1", "c1ccc2ccccc2c1", "CC1CCCCC1", "C1CC2CCC1CC2"}) {
        auto g = parse_smiles(smiles);
        auto h = to_hypergraph(g);
        int rings = 0;
        for (const auto& e : h.hyperedges)
            if (e.kind == HyperedgeKind::ring) ++rings;
        CHECK(rings == static_cast<int>(g.bonds.size()) - static_cast<int>(g.atoms.size()) + 1);
    }
}

TEST_CASE("hypergraph isomorphism") {
    auto cco = to_hypergraph(parse_smiles("CCO"));
    auto occ = to_hypergraph(parse_smiles("OCC"));
    CHECK(hypergraph_isomorphic(cco, occ));

    auto ccn = to_hypergraph(parse_smiles("CCN"));
    CHECK_FALSE(hypergraph_isomorphic(cco, ccn));

    auto benzene = to_hypergraph(parse_smiles("c1ccccc1"));
    auto cyclohexane = to_hypergraph(parse_smiles("C1CCCCC1"));
    CHECK_FALSE(hypergraph_isomorphic(benzene, cyclohexane));

    // reflexive + symmetric on a small set
    std::vector<MolecularHypergraph> hs = {cco, ccn, benzene, cyclohexane,
                                           to_hypergraph(parse_smiles("CC(C)C"))};
    for (const auto& a : hs) CHECK(hypergraph_isomorphic(a, a));
    for (const auto& a : hs)
        for (const auto& b : hs)
            CHECK(hypergraph_isomorphic(a, b) == hypergraph_isomorphic(b, a));
}

TEST_CASE("write_smiles round trips") {
    for (const char* smiles :
         {"CCO", "c1ccccc1", "CC(C)(C)C", "c1ccc2ccccc2c1", "CC(=O)[O-]", "C#N", "C1CC1C",
          "Cc1ccccc1", "C1CCC2(CC1)CCCC2", "[NH4+]", "C"}) {
        auto g = parse_smiles(smiles);
        auto text = write_smiles(g);
        CAPTURE(smiles);
        CAPTURE(text);
        auto g2 = parse_smiles(text);
        CHECK(oracles::graphs_isomorphic_backtracking(g, g2));
    }
}

TEST_CASE("hyperedge features") {
    auto benzene = to_hypergraph(parse_smiles("c1ccccc1"));
    auto f = hyperedge_features(benzene, benzene.hyperedges[0]);
    CHECK(f[0] == 1.0);          // is_ring
    CHECK(f[1] == doctest::Approx(0.75));  // arity/8
    CHECK(f[6] == 1.0);          // aromatic

    auto ethane = to_hypergraph(parse_smiles("CC"));
    auto fb = hyperedge_features(ethane, ethane.hyperedges[0]);
    CHECK(fb[0] == 0.0);
    CHECK(fb[1] == doctest::Approx(0.25));
    CHECK(fb[2] == 1.0);  // single one-hot
    CHECK(fb[3] == 0.0);
    CHECK(fb[6] == 0.0);

    // two C-C single bonds in one molecule give identical vectors
    auto propane = to_hypergraph(parse_smiles("CCC"));
    auto f0 = hyperedge_features(propane, propane.hyperedges[0]);
    auto f1 = hyperedge_features(propane, propane.hyperedges[1]);
    CHECK(f0 == f1);
    CHECK(f0[15] == 0.0);  // reserved slot stays zero
}
