#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "geodeg/meta_grammar.hpp"
#include "geodeg/trees.hpp"

namespace geodeg::geometry {

enum class NodeKind { root, meta_tree, molecular_leaf };

struct GeoNode {
    int id = 0;
    NodeKind kind = NodeKind::meta_tree;
    trees::CanonicalCode canonical;  // root and meta trees
    int tree_size = 0;
    std::string mol_id;  // leaves only
};

struct NotCoveredError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Geometry {
public:
    int k = 0;
    int max_tree_size = 0;
    std::vector<GeoNode> nodes;
    std::vector<std::pair<int, int>> edges;  // a < b, sorted, no duplicates

    int root_id() const { return 0; }
    const std::vector<int>& neighbors(int id) const;
    int meta_node_by_code(const trees::CanonicalCode& code) const;  // -1 if absent

    // Appends a molecular leaf under the meta node isomorphic to jt.
    // Throws NotCoveredError when no such meta node exists.
    int attach_leaf(const trees::UnorderedTree& jt, const std::string& mol_id);

    int shortest_path(int a, int b) const;  // unit-weight BFS distance

    void add_edge(int a, int b);
    void rebuild_index();

private:
    std::vector<std::vector<int>> adjacency_;
    std::unordered_map<std::string, int> code_to_node_;
};

struct GeometryStats {
    std::map<int, int> meta_nodes_per_size;  // includes the size-1 root
    int meta_node_count = 0;                 // excluding root
    int edge_count = 0;                      // meta-meta edges incl. the root edge
    int edge_count_excluding_root = 0;
    int leaf_count = 0;
};

struct MetaBuildResult {
    Geometry geometry;
    std::vector<trees::UnorderedTree> node_trees;  // parallel to geometry.nodes
};

// BFS over productions from the root (start symbol), canonical-code
// deduplication, children capped at max_tree_size. Node ids are BFS order
// with canonical-code tie-break among one parent's new children.
MetaBuildResult build_meta_geometry(const meta_grammar::MetaRuleSet& rules, int max_tree_size);

GeometryStats stats(const Geometry& geo);

// Line-oriented UTF-8 format:
//   GEOM v1 k=<k> max_size=<n> checksum=<hex>
//   N <id> <root|meta> <size> <canonical-hex>
//   L <id> <meta_id> <mol_id>
//   E <a> <b>            (a < b)
std::string serialize(const Geometry& geo);
Geometry deserialize(const std::string& bytes);  // throws FormatError

std::uint64_t geometry_checksum(const Geometry& geo);

}  // namespace geodeg::geometry
