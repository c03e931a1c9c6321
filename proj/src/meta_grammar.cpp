#include "geodeg/meta_grammar.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "geodeg/geometry.hpp"

namespace geodeg::meta_grammar {

using trees::CanonicalCode;
using trees::UnorderedTree;

const MetaRule* MetaRuleSet::find(const std::string& id) const {
    for (const auto& r : rules)
        if (r.id == id) return &r;
    return nullptr;
}

MetaRuleSet MetaRuleSet::without(const std::vector<std::string>& dropped_ids) const {
    MetaRuleSet out;
    out.k = k;
    for (const auto& r : rules)
        if (std::find(dropped_ids.begin(), dropped_ids.end(), r.id) == dropped_ids.end())
            out.rules.push_back(r);
    return out;
}

MetaRuleSet build_meta_rules(int k) {
    if (k < 1 || k > 8) throw std::invalid_argument("build_meta_rules: k out of range [1,8]");
    MetaRuleSet set;
    set.k = k;
    set.rules.push_back({"p0_1", RuleKind::start, 0, 0});
    for (int j = 2; j <= k; ++j) {
        set.rules.push_back({"p0_" + std::to_string(j), RuleKind::extend, j - 1, 0});
        for (int i = 1; i <= j / 2; ++i)
            set.rules.push_back(
                {"p" + std::to_string(i) + "_" + std::to_string(j), RuleKind::split, j, i});
    }
    return set;
}

std::vector<ApplicationSite> applicable_sites(const MetaRule& rule, const UnorderedTree& t) {
    std::vector<ApplicationSite> sites;
    switch (rule.kind) {
        case RuleKind::start:
            if (t.n == 1) sites.push_back({0, {}});
            break;
        case RuleKind::extend:
            if (t.n == 1) break;  // the lone start node is matched by the start rule only
            for (int v = 0; v < t.n; ++v)
                if (static_cast<int>(t.adj[v].size()) == rule.lhs_anchor_count)
                    sites.push_back({v, {}});
            break;
        case RuleKind::split:
            for (int v = 0; v < t.n; ++v) {
                if (static_cast<int>(t.adj[v].size()) != rule.lhs_anchor_count) continue;
                const auto& nb = t.adj[v];
                const int deg = static_cast<int>(nb.size());
                // i-subsets in lexicographic bitmask order
                for (std::uint32_t mask = 0; mask < (1u << deg); ++mask) {
                    if (__builtin_popcount(mask) != rule.split) continue;
                    ApplicationSite s;
                    s.node = v;
                    for (int p = 0; p < deg; ++p)
                        if (mask & (1u << p)) s.moved_neighbors.push_back(nb[p]);
                    sites.push_back(std::move(s));
                }
            }
            break;
    }
    return sites;
}

UnorderedTree apply_rule(const MetaRule& rule, const UnorderedTree& t, const ApplicationSite& site) {
    if (rule.kind == RuleKind::start) {
        if (t.n != 1) throw std::invalid_argument("start rule applies only to the start symbol");
        return UnorderedTree::path(2);
    }
    const int v = site.node;
    if (v < 0 || v >= t.n || static_cast<int>(t.adj[v].size()) != rule.lhs_anchor_count)
        throw std::invalid_argument("invalid application site for rule " + rule.id);
    UnorderedTree out = t;
    out.n = t.n + 1;
    out.adj.emplace_back();
    const int w = t.n;
    if (rule.kind == RuleKind::split) {
        if (static_cast<int>(site.moved_neighbors.size()) != rule.split)
            throw std::invalid_argument("split site must move exactly " +
                                        std::to_string(rule.split) + " neighbors");
        for (int s : site.moved_neighbors) {
            auto& av = out.adj[v];
            auto it = std::find(av.begin(), av.end(), s);
            if (it == av.end()) throw std::invalid_argument("moved neighbor not adjacent to site");
            av.erase(it);
            auto& as = out.adj[s];
            as.erase(std::find(as.begin(), as.end(), v));
            as.push_back(w);
            out.adj[w].push_back(s);
        }
    }
    out.adj[v].push_back(w);
    out.adj[w].push_back(v);
    for (auto& a : out.adj) std::sort(a.begin(), a.end());
    return out;
}

// ---- verification ----------------------------------------------------------

namespace {

// derivable trees up to the size cap, keyed by canonical code
std::map<CanonicalCode, UnorderedTree> closure(const MetaRuleSet& rules, int n_max) {
    auto build = geometry::build_meta_geometry(rules, n_max);
    std::map<CanonicalCode, UnorderedTree> out;
    for (size_t i = 0; i < build.geometry.nodes.size(); ++i)
        out.emplace(build.geometry.nodes[i].canonical, build.node_trees[i]);
    return out;
}

bool pair_connected(const MetaRuleSet& rules, const UnorderedTree& t, const CanonicalCode& target) {
    for (const auto& rule : rules.rules)
        for (const auto& site : applicable_sites(rule, t))
            if (trees::canonical_code(apply_rule(rule, t, site)) == target) return true;
    return false;
}

}  // namespace

CoverageReport verify_degree_coverage(const MetaRuleSet& rules, int n_max) {
    if (n_max > 10) throw std::invalid_argument("verify_degree_coverage: n_max must be <= 10");
    CoverageReport report;
    auto reachable = closure(rules, n_max);
    auto all = trees::enumerate_free_trees(n_max, rules.k);
    for (int n = 1; n <= n_max; ++n)
        for (const auto& t : all[n]) {
            auto code = trees::canonical_code(t);
            if (!reachable.count(code)) report.missing.push_back(code);
        }
    report.pass = report.missing.empty();
    return report;
}

EditCompleteReport verify_edit_complete(const MetaRuleSet& rules, int n_max) {
    if (n_max > 9) throw std::invalid_argument("verify_edit_complete: n_max must be <= 9");
    EditCompleteReport report;
    auto reachable = closure(rules, n_max);
    for (const auto& [code, t] : reachable) {
        if (t.n + 1 > n_max) continue;
        for (const auto& target : trees::one_step_insertions(t, trees::kUnbounded)) {
            auto it = reachable.find(target);
            if (it == reachable.end()) continue;  // pair not derivable
            if (!pair_connected(rules, t, target)) report.witnesses.push_back({code, target});
        }
    }
    report.pass = report.witnesses.empty();
    return report;
}

MinimalReport verify_minimal(const MetaRuleSet& rules, int n_max) {
    if (n_max > 8) throw std::invalid_argument("verify_minimal: n_max must be <= 8");
    MinimalReport report;

    // insertion-operation cases occurring in derivable trees: (m, 0) = leaf
    // attach at a degree-m node, (m, i) = split of a degree-m node moving i
    auto reachable = closure(rules, n_max);
    std::set<std::pair<int, int>> cases;
    for (const auto& [code, t] : reachable) {
        if (t.n + 1 > n_max) continue;
        for (int v = 0; v < t.n; ++v) {
            const int m = static_cast<int>(t.adj[v].size());
            if (m + 1 <= rules.k || t.n == 1) cases.insert({m, 0});
            for (int i = 1; i <= m / 2; ++i) cases.insert({m, i});
        }
    }
    auto covers_case = [](const MetaRuleSet& set, int m, int i) {
        for (const auto& r : set.rules) {
            if (i == 0 && m == 0 && r.kind == RuleKind::start) return true;
            if (i == 0 && r.kind == RuleKind::extend && r.lhs_anchor_count == m) return true;
            if (i >= 1 && r.kind == RuleKind::split && r.lhs_anchor_count == m && r.split == i)
                return true;
        }
        return false;
    };

    for (size_t r = 0; r < rules.rules.size(); ++r) {
        MetaRuleSet reduced;
        reduced.k = rules.k;
        for (size_t j = 0; j < rules.rules.size(); ++j)
            if (j != r) reduced.rules.push_back(rules.rules[j]);

        bool necessary = false;
        if (!verify_degree_coverage(reduced, n_max).pass) necessary = true;
        if (!necessary && !verify_edit_complete(reduced, n_max).pass) necessary = true;
        if (!necessary)
            for (auto [m, i] : cases)
                if (!covers_case(reduced, m, i)) {
                    necessary = true;
                    break;
                }
        if (!necessary) report.redundant.push_back(rules.rules[r].id);
    }
    report.pass = report.redundant.empty();
    return report;
}

}  // namespace geodeg::meta_grammar
