#include "geodeg/trees.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "geodeg/util.hpp"

namespace geodeg::trees {

UnorderedTree UnorderedTree::single_node() {
    UnorderedTree t;
    t.n = 1;
    t.adj.resize(1);
    return t;
}

UnorderedTree UnorderedTree::path(int n) {
    UnorderedTree t;
    t.n = n;
    t.adj.resize(n);
    for (int i = 0; i + 1 < n; ++i) {
        t.adj[i].push_back(i + 1);
        t.adj[i + 1].push_back(i);
    }
    for (auto& a : t.adj) std::sort(a.begin(), a.end());
    return t;
}

UnorderedTree UnorderedTree::star(int leaves) {
    UnorderedTree t;
    t.n = leaves + 1;
    t.adj.resize(t.n);
    for (int i = 1; i <= leaves; ++i) {
        t.adj[0].push_back(i);
        t.adj[i].push_back(0);
    }
    return t;
}

UnorderedTree UnorderedTree::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    UnorderedTree t;
    t.n = n;
    t.adj.resize(n);
    for (auto [a, b] : edges) {
        if (a < 0 || a >= n || b < 0 || b >= n || a == b)
            throw std::invalid_argument("bad edge in tree construction");
        t.adj[a].push_back(b);
        t.adj[b].push_back(a);
    }
    for (auto& a : t.adj) std::sort(a.begin(), a.end());
    if (!t.valid()) throw std::invalid_argument("edge list does not form a tree");
    return t;
}

bool UnorderedTree::valid() const {
    if (n <= 0 || static_cast<int>(adj.size()) != n) return false;
    int edge_ends = 0;
    for (int v = 0; v < n; ++v) {
        for (int u : adj[v]) {
            if (u < 0 || u >= n || u == v) return false;
            if (!std::binary_search(adj[u].begin(), adj[u].end(), v)) return false;
        }
        edge_ends += static_cast<int>(adj[v].size());
    }
    if (edge_ends != 2 * (n - 1)) return false;
    // connectivity
    std::vector<int> stack = {0};
    std::vector<char> seen(n, 0);
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int u : adj[v])
            if (!seen[u]) {
                seen[u] = 1;
                ++count;
                stack.push_back(u);
            }
    }
    return count == n;  // acyclic follows from edge count + connectivity
}

int max_degree(const UnorderedTree& t) {
    int d = 0;
    for (const auto& a : t.adj) d = std::max(d, static_cast<int>(a.size()));
    return d;
}

// ---- canonical codes -------------------------------------------------------

namespace {

// centroid(s): nodes minimizing the largest component after removal
std::vector<int> centroids(const UnorderedTree& t) {
    if (t.n == 1) return {0};
    std::vector<int> size(t.n, 1), order, parent(t.n, -1);
    order.reserve(t.n);
    // iterative post-order from node 0
    std::vector<int> stack = {0};
    std::vector<char> seen(t.n, 0);
    seen[0] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        order.push_back(v);
        for (int u : t.adj[v])
            if (!seen[u]) {
                seen[u] = 1;
                parent[u] = v;
                stack.push_back(u);
            }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (parent[*it] >= 0) size[parent[*it]] += size[*it];

    int best = t.n;
    std::vector<int> cents;
    for (int v = 0; v < t.n; ++v) {
        int worst = t.n - size[v];
        for (int u : t.adj[v])
            if (parent[u] == v) worst = std::max(worst, size[u]);
        if (worst < best) {
            best = worst;
            cents = {v};
        } else if (worst == best) {
            cents.push_back(v);
        }
    }
    return cents;
}

std::string ahu(const UnorderedTree& t, int root) {
    // iterative AHU: children codes sorted and concatenated inside parens
    std::vector<std::string> code(t.n);
    std::vector<int> parent(t.n, -2), state;
    std::vector<int> stack = {root};
    parent[root] = -1;
    std::vector<int> post;
    post.reserve(t.n);
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        post.push_back(v);
        for (int u : t.adj[v])
            if (parent[u] == -2) {
                parent[u] = v;
                stack.push_back(u);
            }
    }
    for (auto it = post.rbegin(); it != post.rend(); ++it) {
        int v = *it;
        std::vector<std::string> subs;
        for (int u : t.adj[v])
            if (parent[u] == v) subs.push_back(std::move(code[u]));
        std::sort(subs.begin(), subs.end());
        std::string s = "(";
        for (auto& x : subs) s += x;
        s += ")";
        code[v] = std::move(s);
    }
    return code[root];
}

}  // namespace

CanonicalCode canonical_code(const UnorderedTree& t) {
    auto cents = centroids(t);
    std::string best;
    for (int c : cents) {
        std::string s = ahu(t, c);
        if (best.empty() || s < best) best = std::move(s);
    }
    return CanonicalCode{best};
}

bool trees_isomorphic(const UnorderedTree& t1, const UnorderedTree& t2) {
    if (t1.n != t2.n) return false;
    return canonical_code(t1) == canonical_code(t2);
}

std::string CanonicalCode::hex() const { return to_hex(bytes); }

CanonicalCode CanonicalCode::from_hex(const std::string& h) { return CanonicalCode{geodeg::from_hex(h)}; }

int CanonicalCode::tree_size() const {
    return static_cast<int>(std::count(bytes.begin(), bytes.end(), '('));
}

UnorderedTree tree_from_code(const CanonicalCode& code) {
    const std::string& s = code.bytes;
    if (s.empty() || s[0] != '(') throw std::invalid_argument("malformed canonical code");
    UnorderedTree t;
    t.n = code.tree_size();
    t.adj.resize(t.n);
    std::vector<int> path;
    int next_id = 0;
    for (char c : s) {
        if (c == '(') {
            int v = next_id++;
            if (!path.empty()) {
                t.adj[path.back()].push_back(v);
                t.adj[v].push_back(path.back());
            }
            path.push_back(v);
        } else if (c == ')') {
            if (path.empty()) throw std::invalid_argument("malformed canonical code");
            path.pop_back();
        } else {
            throw std::invalid_argument("malformed canonical code");
        }
    }
    if (!path.empty() || next_id != t.n) throw std::invalid_argument("malformed canonical code");
    for (auto& a : t.adj) std::sort(a.begin(), a.end());
    return t;
}

// ---- enumeration and insertions -------------------------------------------

std::vector<std::vector<UnorderedTree>> enumerate_free_trees(int n_max, int k) {
    if (n_max < 1 || n_max > 12) throw std::invalid_argument("enumerate_free_trees: n_max out of range [1,12]");
    std::vector<std::vector<UnorderedTree>> out(n_max + 1);
    out[1].push_back(UnorderedTree::single_node());
    for (int n = 2; n <= n_max; ++n) {
        // every size-n tree arises from a size-(n-1) tree by attaching a leaf
        std::map<CanonicalCode, UnorderedTree> seen;
        for (const auto& t : out[n - 1]) {
            for (int v = 0; v < t.n; ++v) {
                if (k != kUnbounded && static_cast<int>(t.adj[v].size()) + 1 > k) continue;
                UnorderedTree c = t;
                c.n = n;
                c.adj.emplace_back();
                c.adj[v].push_back(n - 1);
                c.adj[n - 1].push_back(v);
                std::sort(c.adj[v].begin(), c.adj[v].end());
                seen.emplace(canonical_code(c), std::move(c));
            }
        }
        out[n].reserve(seen.size());
        for (auto& [code, t] : seen) out[n].push_back(std::move(t));
    }
    return out;
}

std::set<CanonicalCode> one_step_insertions(const UnorderedTree& t, int k) {
    std::set<CanonicalCode> out;
    for (int v = 0; v < t.n; ++v) {
        const auto& nb = t.adj[v];
        const int deg = static_cast<int>(nb.size());
        for (std::uint32_t mask = 0; mask < (1u << deg); ++mask) {
            const int moved = __builtin_popcount(mask);
            // resulting degrees: v' gets moved+1, v gets deg-moved+1
            if (k != kUnbounded && (moved + 1 > k || deg - moved + 1 > k)) continue;
            UnorderedTree c;
            c.n = t.n + 1;
            c.adj.assign(c.n, {});
            const int w = t.n;
            for (int a = 0; a < t.n; ++a) {
                for (int b : t.adj[a]) {
                    if (a >= b) continue;
                    int x = a, y = b;
                    // rehome edge (v, s) with s in the moved subset to (w, s)
                    if (x == v) {
                        auto pos = std::lower_bound(nb.begin(), nb.end(), y) - nb.begin();
                        if (mask & (1u << pos)) x = w;
                    } else if (y == v) {
                        auto pos = std::lower_bound(nb.begin(), nb.end(), x) - nb.begin();
                        if (mask & (1u << pos)) y = w;
                    }
                    c.adj[x].push_back(y);
                    c.adj[y].push_back(x);
                }
            }
            c.adj[v].push_back(w);
            c.adj[w].push_back(v);
            for (auto& a : c.adj) std::sort(a.begin(), a.end());
            out.insert(canonical_code(c));
        }
    }
    return out;
}

bool ted_one(const UnorderedTree& t_small, const UnorderedTree& t_large) {
    if (t_small.n >= t_large.n)
        throw std::invalid_argument("ted_one: |t_small| must be < |t_large|");
    if (t_large.n != t_small.n + 1) return false;
    auto ins = one_step_insertions(t_small, kUnbounded);
    return ins.count(canonical_code(t_large)) > 0;
}

}  // namespace geodeg::trees
