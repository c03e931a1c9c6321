#pragma once

#include <set>
#include <string>
#include <vector>

namespace geodeg::trees {

// Degree bound sentinel: no bound.
inline constexpr int kUnbounded = 0;

// Unrooted, unordered tree with homogeneous node labels. Node ids are
// 0..n-1; adjacency lists are kept sorted.
struct UnorderedTree {
    int n = 0;
    std::vector<std::vector<int>> adj;

    static UnorderedTree single_node();
    static UnorderedTree path(int n);
    static UnorderedTree star(int leaves);  // K1,leaves

    // builds from an undirected edge list; validates tree shape
    static UnorderedTree from_edges(int n, const std::vector<std::pair<int, int>>& edges);

    bool valid() const;  // connected, acyclic, symmetric adjacency
};

// Exact canonical form: equal bytes <=> isomorphic trees.
struct CanonicalCode {
    std::string bytes;

    bool operator==(const CanonicalCode& o) const { return bytes == o.bytes; }
    bool operator!=(const CanonicalCode& o) const { return bytes != o.bytes; }
    bool operator<(const CanonicalCode& o) const { return bytes < o.bytes; }

    std::string hex() const;
    static CanonicalCode from_hex(const std::string& hex);

    // tree size recoverable from the encoding: one '(' per node
    int tree_size() const;
};

// AHU encoding rooted at the centroid; for bicentroidal trees both roots are
// tried and the lexicographically smaller code kept.
CanonicalCode canonical_code(const UnorderedTree& t);

bool trees_isomorphic(const UnorderedTree& t1, const UnorderedTree& t2);

int max_degree(const UnorderedTree& t);

// Rebuilds a tree from its canonical code (inverse of canonical_code up to
// isomorphism). Needed when closures are stored as codes.
UnorderedTree tree_from_code(const CanonicalCode& code);

// All pairwise non-isomorphic trees with max degree <= k (k = kUnbounded for
// no bound), indexed by size: result[s] holds the size-s trees, s = 1..n_max.
// Deterministic: within each size, sorted by canonical code.
std::vector<std::vector<UnorderedTree>> enumerate_free_trees(int n_max, int k);

// One-step inserting operation: choose node v and neighbor subset S of N(v);
// add v' adjacent to v and rehome S to v'. Results with max degree <= k,
// deduplicated as canonical codes.
std::set<CanonicalCode> one_step_insertions(const UnorderedTree& t, int k);

// TED(t_small, t_large) == 1 for homogeneous-label trees with |t_large| =
// |t_small| + 1; equivalently t_large arises by one insertion. A size gap
// larger than one is always false. Throws if |t_small| >= |t_large|.
bool ted_one(const UnorderedTree& t_small, const UnorderedTree& t_large);

}  // namespace geodeg::trees
