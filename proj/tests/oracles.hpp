#pragma once

// Test-only oracles, kept independent of the library implementations they
// check.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <set>
#include <vector>

#include "geodeg/chem.hpp"
#include "geodeg/trees.hpp"

namespace oracles {

// Plain backtracking unrooted-tree isomorphism (no canonical codes).
inline bool trees_isomorphic_backtracking(const geodeg::trees::UnorderedTree& a,
                                          const geodeg::trees::UnorderedTree& b) {
    if (a.n != b.n) return false;
    const int n = a.n;
    std::vector<int> map_ab(n, -1), used_b(n, 0);
    // order a's nodes so each node (after the first) touches an earlier one
    std::vector<int> order;
    {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            order.push_back(v);
            for (int u : a.adj[v])
                if (!seen[u]) {
                    seen[u] = 1;
                    stack.push_back(u);
                }
        }
    }
    auto rec = [&](auto&& self, size_t pos) -> bool {
        if (pos == order.size()) return true;
        int v = order[pos];
        for (int w = 0; w < n; ++w) {
            if (used_b[w] || a.adj[v].size() != b.adj[w].size()) continue;
            bool ok = true;
            for (int u : a.adj[v]) {
                if (map_ab[u] < 0) continue;
                if (!std::binary_search(b.adj[w].begin(), b.adj[w].end(), map_ab[u])) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            map_ab[v] = w;
            used_b[w] = 1;
            if (self(self, pos + 1)) return true;
            map_ab[v] = -1;
            used_b[w] = 0;
        }
        return false;
    };
    return rec(rec, 0);
}

// Exhaustive minimum cycle basis: enumerate all simple cycles, sort by
// length, greedily reduce over GF(2).
inline std::vector<std::vector<int>> min_cycle_basis_exhaustive(
    const geodeg::chem::MolecularGraph& g) {
    const int n = static_cast<int>(g.atoms.size());
    const int m = static_cast<int>(g.bonds.size());
    const int dim = m - n + 1;
    if (dim <= 0) return {};
    auto adj = g.adjacency();
    std::map<std::pair<int, int>, int> eidx;
    for (int e = 0; e < m; ++e) eidx[std::minmax(g.bonds[e].a, g.bonds[e].b)] = e;

    // all simple cycles by DFS from each minimal start vertex
    std::set<std::vector<int>> cycles_atoms;
    std::vector<std::pair<std::vector<int>, std::vector<std::uint64_t>>> cycles;
    const size_t words = (m + 63) / 64;
    std::vector<int> path;
    std::vector<char> on_path(n, 0);
    auto dfs = [&](auto&& self, int start, int v) -> void {
        for (int u : adj[v]) {
            if (u == start && path.size() >= 3) {
                std::vector<int> atoms = path;
                std::sort(atoms.begin(), atoms.end());
                if (cycles_atoms.insert(atoms).second) {
                    std::vector<std::uint64_t> bits(words, 0);
                    for (size_t i = 0; i < path.size(); ++i) {
                        int a = path[i], b = path[(i + 1) % path.size()];
                        int e = eidx.at(std::minmax(a, b));
                        bits[e / 64] ^= 1ULL << (e % 64);
                    }
                    cycles.push_back({atoms, bits});
                }
            } else if (u > start && !on_path[u]) {
                path.push_back(u);
                on_path[u] = 1;
                self(self, start, u);
                on_path[u] = 0;
                path.pop_back();
            }
        }
    };
    for (int s = 0; s < n; ++s) {
        path = {s};
        on_path.assign(n, 0);
        on_path[s] = 1;
        dfs(dfs, s, s);
    }
    std::sort(cycles.begin(), cycles.end(), [](const auto& x, const auto& y) {
        if (x.first.size() != y.first.size()) return x.first.size() < y.first.size();
        return x.first < y.first;
    });
    std::vector<std::vector<std::uint64_t>> rows;
    std::vector<int> pivots;
    std::vector<std::vector<int>> basis;
    for (const auto& [atoms, bits] : cycles) {
        if (static_cast<int>(basis.size()) == dim) break;
        auto row = bits;
        for (size_t r = 0; r < rows.size(); ++r)
            if (row[pivots[r] / 64] & (1ULL << (pivots[r] % 64)))
                for (size_t w = 0; w < words; ++w) row[w] ^= rows[r][w];
        int pivot = -1;
        for (int e = 0; e < m && pivot < 0; ++e)
            if (row[e / 64] & (1ULL << (e % 64))) pivot = e;
        if (pivot < 0) continue;
        rows.push_back(row);
        pivots.push_back(pivot);
        basis.push_back(atoms);
    }
    std::sort(basis.begin(), basis.end(), [](const auto& x, const auto& y) {
        if (x.size() != y.size()) return x.size() < y.size();
        return x < y;
    });
    return basis;
}

// expm(L*t) by eigendecomposition (general real matrix, complex spectrum)
inline Eigen::MatrixXd expm_eig(const Eigen::MatrixXd& l, double t) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(l);
    Eigen::MatrixXcd v = es.eigenvectors();
    Eigen::VectorXcd lam = es.eigenvalues();
    Eigen::MatrixXcd d = (lam.array() * t).exp().matrix().asDiagonal();
    Eigen::MatrixXcd r = v * d * v.inverse();
    return r.real();
}

// Backtracking molecular-graph isomorphism (atoms + bonds, no hypergraphs).
inline bool graphs_isomorphic_backtracking(const geodeg::chem::MolecularGraph& a,
                                           const geodeg::chem::MolecularGraph& b) {
    if (a.atoms.size() != b.atoms.size() || a.bonds.size() != b.bonds.size()) return false;
    const int n = static_cast<int>(a.atoms.size());
    auto adj_a = a.adjacency(), adj_b = b.adjacency();
    std::map<std::pair<int, int>, geodeg::chem::BondOrder> order_a, order_b;
    for (const auto& bo : a.bonds) order_a[std::minmax(bo.a, bo.b)] = bo.order;
    for (const auto& bo : b.bonds) order_b[std::minmax(bo.a, bo.b)] = bo.order;
    std::vector<int> map_ab(n, -1), used(n, 0);
    auto compatible = [&](int va, int vb) {
        return a.atoms[va].element == b.atoms[vb].element &&
               a.atoms[va].aromatic == b.atoms[vb].aromatic &&
               a.atoms[va].formal_charge == b.atoms[vb].formal_charge &&
               adj_a[va].size() == adj_b[vb].size();
    };
    auto rec = [&](auto&& self, int v) -> bool {
        if (v == n) return true;
        for (int w = 0; w < n; ++w) {
            if (used[w] || !compatible(v, w)) continue;
            bool ok = true;
            for (int u : adj_a[v]) {
                if (u > v || map_ab[u] < 0) continue;
                auto it = order_b.find(std::minmax(w, map_ab[u]));
                if (it == order_b.end() || it->second != order_a.at(std::minmax(v, u))) {
                    ok = false;
                    break;
                }
            }
            // also reject extra adjacencies in b
            if (ok)
                for (int u = 0; u < v; ++u)
                    if (map_ab[u] >= 0 &&
                        order_b.count(std::minmax(w, map_ab[u])) !=
                            order_a.count(std::minmax(v, u))) {
                        ok = false;
                        break;
                    }
            if (!ok) continue;
            map_ab[v] = w;
            used[w] = 1;
            if (self(self, v + 1)) return true;
            map_ab[v] = -1;
            used[w] = 0;
        }
        return false;
    };
    return rec(rec, 0);
}

}  // namespace oracles
