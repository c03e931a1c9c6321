#pragma once

#include <string>
#include <vector>

#include "geodeg/trees.hpp"

namespace geodeg::meta_grammar {

enum class RuleKind {
    start,   // p0_1: X -> two connected non-terminals (P2)
    extend,  // p0_k: attach a leaf at a node of degree k-1
    split,   // pi_k: divide a degree-k node, moving i neighbors to the new node
};

struct MetaRule {
    std::string id;            // "p0_1", "p0_4", "p2_4", ...
    RuleKind kind = RuleKind::start;
    int lhs_anchor_count = 0;  // degree of the matched non-terminal
    int split = 0;             // i for split rules, 0 otherwise
};

struct MetaRuleSet {
    int k = 0;
    std::vector<MetaRule> rules;

    const MetaRule* find(const std::string& id) const;
    MetaRuleSet without(const std::vector<std::string>& dropped_ids) const;
};

struct ApplicationSite {
    int node = 0;
    std::vector<int> moved_neighbors;  // split rules only; |moved| == rule.split
};

// Inductive construction: P(1) = {p0_1}; P(k) = P(k-1) + {p0_k} + {pi_k : 1 <= i <= k/2}.
// Rule count: 1 + sum_{j=2..k} (1 + floor(j/2)). Valid for 1 <= k <= 8.
MetaRuleSet build_meta_rules(int k);

// Start rule: single site on the one-node start tree. Extend of level j: one
// site per node of degree j-1. Split pi_j: one site per (degree-j node,
// i-subset of its neighbors). Sites producing isomorphic children are not
// deduplicated here.
std::vector<ApplicationSite> applicable_sites(const MetaRule& rule, const trees::UnorderedTree& t);

// Applies one production; the result has exactly |t|+1 nodes.
trees::UnorderedTree apply_rule(const MetaRule& rule, const trees::UnorderedTree& t,
                                const ApplicationSite& site);

struct CoverageReport {
    bool pass = false;
    std::vector<trees::CanonicalCode> missing;
};

struct EditCompleteReport {
    bool pass = false;
    std::vector<std::pair<trees::CanonicalCode, trees::CanonicalCode>> witnesses;
};

struct MinimalReport {
    bool pass = false;
    std::vector<std::string> redundant;
};

// Every degree-bounded tree up to n_max is derivable from the start symbol
// (closure computed by the geometry BFS).
CoverageReport verify_degree_coverage(const MetaRuleSet& rules, int n_max);

// Every derivable pair (T, T') with |T'| = |T|+1 and TED 1 is connected by a
// single rule application. Witnesses list violating pairs.
EditCompleteReport verify_edit_complete(const MetaRuleSet& rules, int n_max);

// A rule is necessary when removing it loses degree coverage, pair
// edit-completeness, or some insertion-operation case (degree m with i moved
// neighbors) occurring in a derivable tree. Pair connectivity alone
// under-reports necessity: a pair reachable through one rule is often also
// reachable through another site of a different rule, while the operation
// case itself has exactly one matching rule shape.
MinimalReport verify_minimal(const MetaRuleSet& rules, int n_max);

}  // namespace geodeg::meta_grammar
