#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "geodeg/geometry.hpp"
#include "geodeg/util.hpp"
#include <sstream>

using namespace geodeg::geometry;
using geodeg::meta_grammar::build_meta_rules;
using geodeg::trees::UnorderedTree;
using geodeg::trees::canonical_code;

TEST_CASE("tiny geometry: max size 3") {
    auto built = build_meta_geometry(build_meta_rules(4), 3);
    const auto& geo = built.geometry;
    REQUIRE(geo.nodes.size() == 3);  // root, P2, P3
    CHECK(geo.nodes[0].kind == NodeKind::root);
    CHECK(geo.nodes[1].tree_size == 2);
    CHECK(geo.nodes[2].tree_size == 3);
    REQUIRE(geo.edges.size() == 2);
    CHECK(geo.edges[0] == std::pair<int, int>{0, 1});
    CHECK(geo.edges[1] == std::pair<int, int>{1, 2});
}

TEST_CASE("geometry census at k=4 size 10") {
    auto built = build_meta_geometry(build_meta_rules(4), 10);
    auto s = stats(built.geometry);
    CHECK(s.meta_node_count == 149);
    std::vector<int> expect = {1, 1, 1, 2, 3, 5, 9, 18, 35, 75};
    for (int n = 1; n <= 10; ++n) CHECK(s.meta_nodes_per_size.at(n) == expect[n - 1]);
    CHECK(s.edge_count == 455);
    CHECK(s.edge_count_excluding_root == 454);
    CHECK(s.leaf_count == 0);

    // per-size counts equal the enumeration oracle
    auto oracle = geodeg::trees::enumerate_free_trees(10, 4);
    for (int n = 1; n <= 10; ++n)
        CHECK(s.meta_nodes_per_size.at(n) == static_cast<int>(oracle[n].size()));
}

TEST_CASE("level structure: meta edges join sizes n and n+1") {
    auto built = build_meta_geometry(build_meta_rules(3), 8);
    const auto& geo = built.geometry;
    for (auto [a, b] : geo.edges) {
        int sa = geo.nodes[a].tree_size, sb = geo.nodes[b].tree_size;
        CHECK(std::abs(sa - sb) == 1);
    }
}

TEST_CASE("attach_leaf and shortest_path") {
    auto built = build_meta_geometry(build_meta_rules(4), 10);
    Geometry geo = built.geometry;

    // single-node junction tree lands on the root
    int leaf0 = geo.attach_leaf(UnorderedTree::single_node(), "mol-root");
    CHECK(geo.shortest_path(geo.root_id(), leaf0) == 1);

    int leaf1 = geo.attach_leaf(UnorderedTree::path(2), "mol-p2");
    int p2 = geo.meta_node_by_code(canonical_code(UnorderedTree::path(2)));
    CHECK(geo.shortest_path(leaf1, p2) == 1);
    CHECK(geo.shortest_path(geo.root_id(), leaf1) == 2);

    // two leaves on one meta node are at distance 2
    int leaf2 = geo.attach_leaf(UnorderedTree::path(2), "mol-p2-b");
    CHECK(geo.shortest_path(leaf1, leaf2) == 2);

    // leaf on P2 to leaf on P3: leaf-P2-P3-leaf
    int leaf3 = geo.attach_leaf(UnorderedTree::path(3), "mol-p3");
    CHECK(geo.shortest_path(leaf1, leaf3) == 3);

    // root to P3 node
    int p3 = geo.meta_node_by_code(canonical_code(UnorderedTree::path(3)));
    CHECK(geo.shortest_path(geo.root_id(), p3) == 2);

    // degree-5 junction tree is not covered at k=4
    CHECK_THROWS_AS(geo.attach_leaf(UnorderedTree::star(5), "mol-bad"), NotCoveredError);
    // size beyond the cap is not covered
    CHECK_THROWS_AS(geo.attach_leaf(UnorderedTree::path(11), "mol-big"), NotCoveredError);

    // attach_leaf never alters meta nodes or meta edges
    auto s = stats(geo);
    CHECK(s.meta_node_count == 149);
    CHECK(s.edge_count == 455);
    CHECK(s.leaf_count == 4);
}

TEST_CASE("ablation: dropping the 4-anchor split rules") {
    auto full = build_meta_geometry(build_meta_rules(4), 10);
    auto ablated = build_meta_geometry(build_meta_rules(4).without({"p1_4", "p2_4"}), 10);
    auto sf = stats(full.geometry);
    auto sa = stats(ablated.geometry);
    CHECK(sa.meta_node_count == sf.meta_node_count);  // same nodes
    CHECK(sa.edge_count < sf.edge_count);
    double reduction = 1.0 - static_cast<double>(sa.edge_count) / sf.edge_count;
    CHECK(reduction > 0.08);
    CHECK(reduction < 0.12);
}

TEST_CASE("determinism: two builds serialize identically") {
    auto a = build_meta_geometry(build_meta_rules(4), 9);
    auto b = build_meta_geometry(build_meta_rules(4), 9);
    CHECK(serialize(a.geometry) == serialize(b.geometry));
}

TEST_CASE("serialization round trip") {
    auto built = build_meta_geometry(build_meta_rules(4), 10);
    Geometry geo = built.geometry;
    geo.attach_leaf(UnorderedTree::path(4), "leafA");
    geo.attach_leaf(UnorderedTree::single_node(), "leafB");

    auto bytes = serialize(geo);
    auto back = deserialize(bytes);
    CHECK(back.k == geo.k);
    CHECK(back.max_tree_size == geo.max_tree_size);
    REQUIRE(back.nodes.size() == geo.nodes.size());
    for (size_t i = 0; i < geo.nodes.size(); ++i) {
        CHECK(back.nodes[i].kind == geo.nodes[i].kind);
        CHECK(back.nodes[i].canonical == geo.nodes[i].canonical);
        CHECK(back.nodes[i].mol_id == geo.nodes[i].mol_id);
    }
    CHECK(back.edges == geo.edges);
    CHECK(serialize(back) == bytes);

    // truncation breaks the checksum
    auto truncated = bytes.substr(0, bytes.size() - 10);
    CHECK_THROWS_AS(deserialize(truncated), FormatError);

    // dangling edge reference
    auto dangling = bytes;
    // recompute a body with a bogus edge and a matching checksum to isolate
    // the dangling-reference check from the checksum check
    {
        auto pos = dangling.find('\n');
        std::string body = dangling.substr(pos + 1) + "E 0 99999\n";
        std::ostringstream head;
        head << "GEOM v1 k=" << geo.k << " max_size=" << geo.max_tree_size << " checksum="
             << std::hex << geodeg::fnv1a(body) << '\n';
        dangling = head.str() + body;
    }
    CHECK_THROWS_AS(deserialize(dangling), FormatError);

    // version mismatch
    std::string wrong = bytes;
    wrong.replace(wrong.find("v1"), 2, "v9");
    CHECK_THROWS_AS(deserialize(wrong), FormatError);
}

TEST_CASE("edge set equals the insertion-pair oracle (small scale)") {
    auto built = build_meta_geometry(build_meta_rules(3), 7);
    const auto& geo = built.geometry;
    std::set<std::pair<std::string, std::string>> geo_pairs;
    for (auto [a, b] : geo.edges) {
        auto ka = geo.nodes[a].canonical.bytes, kb = geo.nodes[b].canonical.bytes;
        geo_pairs.insert({std::min(ka, kb), std::max(ka, kb)});
    }
    std::set<std::pair<std::string, std::string>> oracle_pairs;
    auto all = geodeg::trees::enumerate_free_trees(7, 3);
    for (int n = 1; n <= 6; ++n) {
        for (const auto& t : all[n]) {
            auto code_t = canonical_code(t);
            for (const auto& code_c : geodeg::trees::one_step_insertions(t, 3)) {
                auto ka = code_t.bytes, kb = code_c.bytes;
                oracle_pairs.insert({std::min(ka, kb), std::max(ka, kb)});
            }
        }
    }
    CHECK(geo_pairs == oracle_pairs);
}
