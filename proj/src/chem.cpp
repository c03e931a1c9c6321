#include "geodeg/chem.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "geodeg/util.hpp"

namespace geodeg::chem {

std::vector<std::vector<int>> MolecularGraph::adjacency() const {
    std::vector<std::vector<int>> adj(atoms.size());
    for (const auto& b : bonds) {
        adj[b.a].push_back(b.b);
        adj[b.b].push_back(b.a);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

// ---- SMILES parsing --------------------------------------------------------

namespace {

const std::set<std::string> kOrganicElements = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
const std::set<std::string> kAllElements = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "H"};
const std::set<char> kAromaticChars = {'b', 'c', 'n', 'o', 'p', 's'};

struct RingOpen {
    int atom;
    std::optional<BondOrder> order;
    size_t offset;
};

struct Parser {
    const std::string& text;
    size_t i = 0;
    MolecularGraph g;
    std::vector<int> branch_stack;
    int prev = -1;
    std::optional<BondOrder> pending;
    size_t pending_offset = 0;
    std::map<int, RingOpen> open_rings;
    std::set<std::pair<int, int>> bond_set;

    explicit Parser(const std::string& t) : text(t) {}

    [[noreturn]] void fail(const std::string& msg, size_t off) const { throw ParseError(msg, off); }

    char peek() const { return i < text.size() ? text[i] : '\0'; }

    int add_atom(const std::string& element, bool aromatic, int charge, size_t off) {
        if (!kAllElements.count(element)) fail("unsupported element '" + element + "'", off);
        Atom a;
        a.element = element;
        a.aromatic = aromatic;
        a.formal_charge = charge;
        a.index = static_cast<int>(g.atoms.size());
        g.atoms.push_back(a);
        return a.index;
    }

    void add_bond(int a, int b, std::optional<BondOrder> order, size_t off) {
        if (a == b) fail("ring bond to the same atom", off);
        auto key = std::minmax(a, b);
        if (!bond_set.insert(key).second) fail("duplicate bond between atoms", off);
        Bond bond;
        bond.a = a;
        bond.b = b;
        if (order) {
            bond.order = *order;
        } else {
            bond.order = (g.atoms[a].aromatic && g.atoms[b].aromatic) ? BondOrder::aromatic
                                                                      : BondOrder::single;
        }
        g.bonds.push_back(bond);
    }

    void attach(int atom, size_t off) {
        if (prev >= 0) add_bond(prev, atom, pending, off);
        else if (pending) fail("bond symbol before any atom", pending_offset);
        pending.reset();
        prev = atom;
    }

    void ring_closure(int num, size_t off) {
        if (prev < 0) fail("ring closure before any atom", off);
        auto it = open_rings.find(num);
        if (it == open_rings.end()) {
            open_rings[num] = RingOpen{prev, pending, off};
        } else {
            std::optional<BondOrder> order = pending;
            if (it->second.order) {
                if (order && *order != *it->second.order)
                    fail("conflicting bond orders on ring closure " + std::to_string(num), off);
                order = it->second.order;
            }
            add_bond(it->second.atom, prev, order, off);
            open_rings.erase(it);
        }
        pending.reset();
    }

    void parse_bracket() {
        size_t start = i;
        ++i;  // consume '['
        if (peek() >= '0' && peek() <= '9') fail("isotopes not supported", i);
        bool aromatic = false;
        std::string element;
        char c = peek();
        if (c >= 'A' && c <= 'Z') {
            element.push_back(c);
            ++i;
            if (peek() >= 'a' && peek() <= 'z' && peek() != 'h') {
                std::string two = element + peek();
                if (kAllElements.count(two)) {
                    element = two;
                    ++i;
                }
            }
        } else if (kAromaticChars.count(c)) {
            aromatic = true;
            element.push_back(static_cast<char>(c - 'a' + 'A'));
            ++i;
        } else {
            fail("expected element symbol in bracket atom", i);
        }
        // hydrogen count: parsed, never materialized (heavy-atom graph)
        if (peek() == 'H') {
            ++i;
            while (peek() >= '0' && peek() <= '9') ++i;
        }
        int charge = 0;
        if (peek() == '+' || peek() == '-') {
            int sign = peek() == '+' ? 1 : -1;
            char sym = peek();
            ++i;
            if (peek() >= '0' && peek() <= '9') {
                int v = 0;
                while (peek() >= '0' && peek() <= '9') v = v * 10 + (text[i++] - '0');
                charge = sign * v;
            } else {
                charge = sign;
                while (peek() == sym) {
                    charge += sign;
                    ++i;
                }
            }
        }
        if (peek() == '@') fail("stereochemistry not supported", i);
        if (peek() != ']') fail("expected ']' in bracket atom", i);
        ++i;
        int atom = add_atom(element, aromatic, charge, start);
        attach(atom, start);
    }

    MolecularGraph run() {
        if (text.empty()) fail("empty SMILES", 0);
        while (i < text.size()) {
            char c = text[i];
            if (c == '(') {
                if (prev < 0) fail("branch before any atom", i);
                branch_stack.push_back(prev);
                ++i;
            } else if (c == ')') {
                if (branch_stack.empty()) fail("unmatched ')'", i);
                if (pending) fail("dangling bond before ')'", pending_offset);
                prev = branch_stack.back();
                branch_stack.pop_back();
                ++i;
            } else if (c == '-' || c == '=' || c == '#' || c == ':') {
                if (pending) fail("duplicate bond symbol", i);
                pending = c == '-'   ? BondOrder::single
                          : c == '=' ? BondOrder::double_
                          : c == '#' ? BondOrder::triple
                                     : BondOrder::aromatic;
                pending_offset = i;
                ++i;
            } else if (c >= '0' && c <= '9') {
                ring_closure(c - '0', i);
                ++i;
            } else if (c == '%') {
                if (i + 2 >= text.size() || text[i + 1] < '0' || text[i + 1] > '9' ||
                    text[i + 2] < '0' || text[i + 2] > '9')
                    fail("'%' ring closure needs two digits", i);
                ring_closure((text[i + 1] - '0') * 10 + (text[i + 2] - '0'), i);
                i += 3;
            } else if (c == '[') {
                parse_bracket();
            } else if (c == '.') {
                fail("disconnected (dot-separated) input not supported", i);
            } else if (c == '/' || c == '\\' || c == '@') {
                fail("stereochemistry not supported", i);
            } else if (c >= 'A' && c <= 'Z') {
                size_t off = i;
                std::string element(1, c);
                ++i;
                if (i < text.size() && text[i] >= 'a' && text[i] <= 'z') {
                    std::string two = element + text[i];
                    if (kOrganicElements.count(two)) {
                        element = two;
                        ++i;
                    }
                }
                if (!kOrganicElements.count(element))
                    fail("unsupported element '" + element + "'", off);
                attach(add_atom(element, false, 0, off), off);
            } else if (kAromaticChars.count(c)) {
                size_t off = i;
                std::string element(1, static_cast<char>(c - 'a' + 'A'));
                ++i;
                attach(add_atom(element, true, 0, off), off);
            } else {
                fail(std::string("unexpected character '") + c + "'", i);
            }
        }
        if (!branch_stack.empty()) fail("unclosed branch '('", text.size());
        if (pending) fail("dangling bond at end of input", pending_offset);
        if (!open_rings.empty()) {
            const auto& [num, open] = *open_rings.begin();
            fail("unclosed ring bond " + std::to_string(num), open.offset);
        }
        if (g.atoms.empty()) fail("no atoms in SMILES", 0);
        return std::move(g);
    }
};

}  // namespace

MolecularGraph parse_smiles(const std::string& text) { return Parser(text).run(); }

// ---- SMILES writing --------------------------------------------------------

namespace {

std::string atom_text(const Atom& a) {
    std::string sym = a.element;
    if (a.aromatic) {
        for (auto& c : sym) c = static_cast<char>(c - 'A' + 'a');
    }
    if (a.formal_charge == 0 && a.element != "H") return sym;
    std::string s = "[" + sym;
    if (a.formal_charge != 0) {
        int q = a.formal_charge;
        s += q > 0 ? '+' : '-';
        if (std::abs(q) > 1) s += std::to_string(std::abs(q));
    }
    s += "]";
    return s;
}

std::string bond_text(const MolecularGraph& g, const Bond& b) {
    switch (b.order) {
        case BondOrder::single:
            return (g.atoms[b.a].aromatic && g.atoms[b.b].aromatic) ? "-" : "";
        case BondOrder::double_:
            return "=";
        case BondOrder::triple:
            return "#";
        case BondOrder::aromatic:
            return (g.atoms[b.a].aromatic && g.atoms[b.b].aromatic) ? "" : ":";
    }
    return "";
}

}  // namespace

std::string write_smiles(const MolecularGraph& g) {
    const int n = static_cast<int>(g.atoms.size());
    auto adj = g.adjacency();
    std::map<std::pair<int, int>, const Bond*> bond_at;
    for (const auto& b : g.bonds) bond_at[std::minmax(b.a, b.b)] = &b;

    // DFS spanning tree; non-tree edges become ring closures
    std::vector<int> parent(n, -2);
    std::vector<std::vector<int>> children(n);
    std::vector<std::vector<std::pair<int, const Bond*>>> closures(n);
    int next_num = 1;
    {
        std::vector<std::pair<int, size_t>> st{{0, 0}};
        parent[0] = -1;
        std::vector<char> seen(n, 0);
        seen[0] = 1;
        std::set<std::pair<int, int>> tree_edges, closed;
        while (!st.empty()) {
            auto& [v, idx] = st.back();
            if (idx >= adj[v].size()) {
                st.pop_back();
                continue;
            }
            int u = adj[v][idx++];
            if (!seen[u]) {
                seen[u] = 1;
                parent[u] = v;
                children[v].push_back(u);
                tree_edges.insert(std::minmax(v, u));
                st.push_back({u, 0});
            } else if (u != parent[v] && !tree_edges.count(std::minmax(v, u)) &&
                       closed.insert(std::minmax(v, u)).second) {
                int num = next_num++;
                const Bond* b = bond_at.at(std::minmax(v, u));
                closures[u].push_back({num, b});
                closures[v].push_back({num, b});
            }
        }
    }

    std::string out;
    auto emit_atom = [&](int v) {
        out += atom_text(g.atoms[v]);
        for (auto [num, b] : closures[v]) {
            out += bond_text(g, *b);
            if (num > 9) {
                out += "%";
                if (num < 10) out += "0";
                out += std::to_string(num);
            } else {
                out += static_cast<char>('0' + num);
            }
        }
    };
    auto rec = [&](auto&& self, int v) -> void {
        emit_atom(v);
        const auto& ch = children[v];
        for (size_t idx = 0; idx < ch.size(); ++idx) {
            int u = ch[idx];
            bool last = idx + 1 == ch.size();
            if (!last) out += "(";
            out += bond_text(g, *bond_at.at(std::minmax(v, u)));
            self(self, u);
            if (!last) out += ")";
        }
    };
    rec(rec, 0);
    return out;
}

// ---- ring perception -------------------------------------------------------

namespace detail {

// cycles as (sorted atom indices, edge-index set)
struct Cycle {
    std::vector<int> atoms;
    std::vector<std::uint64_t> edge_bits;
    int length = 0;
};

std::vector<Cycle> minimum_cycle_basis(const MolecularGraph& g) {
    const int n = static_cast<int>(g.atoms.size());
    const int m = static_cast<int>(g.bonds.size());
    const int dim = m - n + 1;
    if (dim <= 0) return {};

    auto adj = g.adjacency();
    std::map<std::pair<int, int>, int> edge_index;
    for (int e = 0; e < m; ++e) edge_index[std::minmax(g.bonds[e].a, g.bonds[e].b)] = e;
    const size_t words = (m + 63) / 64;

    // Horton candidates: shortest paths from every root v plus one edge (x,y)
    std::vector<Cycle> candidates;
    std::set<std::vector<int>> seen_atom_sets;
    for (int root = 0; root < n; ++root) {
        std::vector<int> dist(n, -1), parent(n, -1);
        std::vector<int> queue = {root};
        dist[root] = 0;
        for (size_t qi = 0; qi < queue.size(); ++qi) {
            int v = queue[qi];
            for (int u : adj[v])
                if (dist[u] < 0) {
                    dist[u] = dist[v] + 1;
                    parent[u] = v;
                    queue.push_back(u);
                }
        }
        auto path_atoms = [&](int x) {
            std::vector<int> p;
            for (int v = x; v >= 0; v = parent[v]) p.push_back(v);
            return p;  // x .. root
        };
        for (int e = 0; e < m; ++e) {
            int x = g.bonds[e].a, y = g.bonds[e].b;
            if (dist[x] < 0 || dist[y] < 0) continue;
            auto px = path_atoms(x), py = path_atoms(y);
            // the two paths must share only the root
            std::set<int> sx(px.begin(), px.end());
            bool ok = true;
            for (size_t j = 0; j + 1 < py.size(); ++j)
                if (sx.count(py[j])) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            Cycle c;
            c.length = dist[x] + dist[y] + 1;
            std::set<int> atom_set(px.begin(), px.end());
            atom_set.insert(py.begin(), py.end());
            if (static_cast<int>(atom_set.size()) != c.length) continue;
            c.atoms.assign(atom_set.begin(), atom_set.end());
            if (!seen_atom_sets.insert(c.atoms).second) continue;
            c.edge_bits.assign(words, 0);
            auto add_edge = [&](int a, int b) {
                int idx = edge_index.at(std::minmax(a, b));
                c.edge_bits[idx / 64] ^= 1ULL << (idx % 64);
            };
            for (size_t j = 0; j + 1 < px.size(); ++j) add_edge(px[j], px[j + 1]);
            for (size_t j = 0; j + 1 < py.size(); ++j) add_edge(py[j], py[j + 1]);
            add_edge(x, y);
            candidates.push_back(std::move(c));
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Cycle& a, const Cycle& b) {
        if (a.length != b.length) return a.length < b.length;
        return a.atoms < b.atoms;
    });

    // greedy GF(2) independence
    std::vector<std::vector<std::uint64_t>> reduced;  // row-echelon rows
    std::vector<int> pivots;
    std::vector<Cycle> basis;
    for (const auto& c : candidates) {
        if (static_cast<int>(basis.size()) == dim) break;
        std::vector<std::uint64_t> row = c.edge_bits;
        for (size_t r = 0; r < reduced.size(); ++r) {
            int p = pivots[r];
            if (row[p / 64] & (1ULL << (p % 64)))
                for (size_t w = 0; w < words; ++w) row[w] ^= reduced[r][w];
        }
        int pivot = -1;
        for (int e = 0; e < m && pivot < 0; ++e)
            if (row[e / 64] & (1ULL << (e % 64))) pivot = e;
        if (pivot < 0) continue;  // dependent
        reduced.push_back(row);
        pivots.push_back(pivot);
        basis.push_back(c);
    }
    std::sort(basis.begin(), basis.end(), [](const Cycle& a, const Cycle& b) {
        if (a.length != b.length) return a.length < b.length;
        return a.atoms < b.atoms;
    });
    return basis;
}

}  // namespace detail

std::vector<std::vector<int>> perceive_rings(const MolecularGraph& g) {
    auto basis = detail::minimum_cycle_basis(g);
    std::vector<std::vector<int>> out;
    out.reserve(basis.size());
    for (auto& c : basis) out.push_back(std::move(c.atoms));
    return out;
}

MolecularHypergraph to_hypergraph(const MolecularGraph& g) {
    MolecularHypergraph h;
    h.atoms = g.atoms;
    auto basis = detail::minimum_cycle_basis(g);
    const int m = static_cast<int>(g.bonds.size());
    std::vector<char> covered(m, 0);
    for (const auto& c : basis) {
        Hyperedge e;
        e.kind = HyperedgeKind::ring;
        e.members = c.atoms;
        e.ring_size = static_cast<int>(c.atoms.size());
        h.hyperedges.push_back(std::move(e));
        for (int idx = 0; idx < m; ++idx)
            if (c.edge_bits[idx / 64] & (1ULL << (idx % 64))) covered[idx] = 1;
    }
    for (int idx = 0; idx < m; ++idx) {
        if (covered[idx]) continue;
        Hyperedge e;
        e.kind = HyperedgeKind::bond;
        e.order = g.bonds[idx].order;
        e.members = {std::min(g.bonds[idx].a, g.bonds[idx].b),
                     std::max(g.bonds[idx].a, g.bonds[idx].b)};
        h.hyperedges.push_back(std::move(e));
    }
    return h;
}

// ---- hypergraph isomorphism ------------------------------------------------

namespace {

std::string atom_signature(const Atom& a) {
    return a.element + (a.aromatic ? ":a" : ":p") + ":" + std::to_string(a.formal_charge);
}

std::string edge_signature(const Hyperedge& e) {
    if (e.kind == HyperedgeKind::ring) return "R" + std::to_string(e.ring_size);
    return "B" + std::to_string(static_cast<int>(e.order));
}

// invariant hash: multiset of atom signatures + multiset of hyperedge signatures
std::uint64_t invariant_hash(const MolecularHypergraph& h) {
    std::vector<std::string> parts;
    for (const auto& a : h.atoms) parts.push_back("A" + atom_signature(a));
    for (const auto& e : h.hyperedges)
        parts.push_back("E" + edge_signature(e) + "#" + std::to_string(e.members.size()));
    std::sort(parts.begin(), parts.end());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& p : parts) hash = fnv1a(p, hash);
    return hash;
}

struct IsoSearch {
    const MolecularHypergraph& h1;
    const MolecularHypergraph& h2;
    std::vector<std::vector<int>> incident1, incident2;  // atom -> hyperedge ids
    std::map<std::vector<int>, int> edge_by_members2;    // sorted members -> edge id
    std::vector<int> map12;                              // h1 atom -> h2 atom or -1
    std::vector<char> used2;
    std::vector<std::string> sig1, sig2;
    std::vector<std::string> env1, env2;  // atom signature + sorted incident edge signatures

    IsoSearch(const MolecularHypergraph& a, const MolecularHypergraph& b) : h1(a), h2(b) {
        auto build = [](const MolecularHypergraph& h, std::vector<std::vector<int>>& inc,
                        std::vector<std::string>& sig, std::vector<std::string>& env) {
            inc.assign(h.atoms.size(), {});
            for (size_t e = 0; e < h.hyperedges.size(); ++e)
                for (int v : h.hyperedges[e].members) inc[v].push_back(static_cast<int>(e));
            sig.resize(h.atoms.size());
            env.resize(h.atoms.size());
            for (size_t v = 0; v < h.atoms.size(); ++v) {
                sig[v] = atom_signature(h.atoms[v]);
                std::vector<std::string> es;
                for (int e : inc[v])
                    es.push_back(edge_signature(h.hyperedges[e]) + "#" +
                                 std::to_string(h.hyperedges[e].members.size()));
                std::sort(es.begin(), es.end());
                env[v] = sig[v];
                for (auto& s : es) env[v] += "|" + s;
            }
        };
        build(h1, incident1, sig1, env1);
        build(h2, incident2, sig2, env2);
        for (size_t e = 0; e < h2.hyperedges.size(); ++e) {
            auto key = h2.hyperedges[e].members;
            edge_by_members2[key] = static_cast<int>(e);
        }
        map12.assign(h1.atoms.size(), -1);
        used2.assign(h2.atoms.size(), 0);
    }

    // every fully-mapped h1 hyperedge must land on an h2 hyperedge of equal signature
    bool edges_consistent(int just_mapped) {
        for (int e : incident1[just_mapped]) {
            const auto& mem = h1.hyperedges[e].members;
            std::vector<int> image;
            bool complete = true;
            for (int v : mem) {
                if (map12[v] < 0) {
                    complete = false;
                    break;
                }
                image.push_back(map12[v]);
            }
            if (!complete) continue;
            std::sort(image.begin(), image.end());
            auto it = edge_by_members2.find(image);
            if (it == edge_by_members2.end()) return false;
            if (edge_signature(h2.hyperedges[it->second]) != edge_signature(h1.hyperedges[e]))
                return false;
        }
        return true;
    }

    bool search(size_t v) {
        if (v == map12.size()) return true;
        for (size_t u = 0; u < used2.size(); ++u) {
            if (used2[u] || env1[v] != env2[u]) continue;
            map12[v] = static_cast<int>(u);
            used2[u] = 1;
            if (edges_consistent(static_cast<int>(v)) && search(v + 1)) return true;
            map12[v] = -1;
            used2[u] = 0;
        }
        return false;
    }
};

}  // namespace

bool hypergraph_isomorphic(const MolecularHypergraph& h1, const MolecularHypergraph& h2) {
    if (h1.atoms.size() != h2.atoms.size() || h1.hyperedges.size() != h2.hyperedges.size())
        return false;
    if (invariant_hash(h1) != invariant_hash(h2)) return false;
    IsoSearch s(h1, h2);
    return s.search(0);
}

// ---- hyperedge features ----------------------------------------------------

std::array<double, kHyperedgeFeatureDim> hyperedge_features(const MolecularHypergraph& h,
                                                            const Hyperedge& e) {
    std::array<double, kHyperedgeFeatureDim> f{};
    const double arity = static_cast<double>(e.members.size());
    f[0] = e.kind == HyperedgeKind::ring ? 1.0 : 0.0;
    f[1] = arity / 8.0;
    if (e.kind == HyperedgeKind::bond) f[2 + static_cast<int>(e.order)] = 1.0;
    bool aromatic = false;
    if (e.kind == HyperedgeKind::bond) {
        aromatic = e.order == BondOrder::aromatic;
    } else {
        aromatic = true;
        for (int v : e.members) aromatic = aromatic && h.atoms[v].aromatic;
    }
    f[6] = aromatic ? 1.0 : 0.0;
    for (int v : e.members) {
        const size_t bucket = fnv1a(h.atoms[v].element) % 8;
        f[7 + bucket] += 1.0 / arity;
    }
    return f;
}

}  // namespace geodeg::chem
