#include "geodeg/geometry.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "geodeg/util.hpp"

namespace geodeg::geometry {

using trees::CanonicalCode;
using trees::UnorderedTree;

const std::vector<int>& Geometry::neighbors(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes.size()))
        throw std::out_of_range("geometry: unknown node id " + std::to_string(id));
    return adjacency_[id];
}

int Geometry::meta_node_by_code(const CanonicalCode& code) const {
    auto it = code_to_node_.find(code.bytes);
    return it == code_to_node_.end() ? -1 : it->second;
}

void Geometry::add_edge(int a, int b) {
    if (a == b) throw std::invalid_argument("geometry: self-loop");
    if (a > b) std::swap(a, b);
    auto pos = std::lower_bound(edges.begin(), edges.end(), std::pair<int, int>{a, b});
    edges.insert(pos, {a, b});
    if (static_cast<int>(adjacency_.size()) < static_cast<int>(nodes.size()))
        adjacency_.resize(nodes.size());
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
}

void Geometry::rebuild_index() {
    adjacency_.assign(nodes.size(), {});
    code_to_node_.clear();
    for (const auto& n : nodes)
        if (n.kind != NodeKind::molecular_leaf) code_to_node_[n.canonical.bytes] = n.id;
    for (auto [a, b] : edges) {
        adjacency_[a].push_back(b);
        adjacency_[b].push_back(a);
    }
    for (auto& a : adjacency_) std::sort(a.begin(), a.end());
}

int Geometry::attach_leaf(const UnorderedTree& jt, const std::string& mol_id) {
    if (!jt.valid()) throw std::invalid_argument("attach_leaf: invalid junction tree");
    if (jt.n > max_tree_size)
        throw NotCoveredError("junction tree of size " + std::to_string(jt.n) +
                              " exceeds geometry cap " + std::to_string(max_tree_size));
    if (trees::max_degree(jt) > k)
        throw NotCoveredError("junction tree degree " + std::to_string(trees::max_degree(jt)) +
                              " exceeds grammar degree " + std::to_string(k));
    int meta = meta_node_by_code(trees::canonical_code(jt));
    if (meta < 0)
        throw NotCoveredError("no isomorphic meta tree for molecule " + mol_id);
    GeoNode leaf;
    leaf.id = static_cast<int>(nodes.size());
    leaf.kind = NodeKind::molecular_leaf;
    leaf.tree_size = jt.n;
    leaf.mol_id = mol_id;
    nodes.push_back(leaf);
    adjacency_.emplace_back();
    add_edge(meta, leaf.id);
    return leaf.id;
}

int Geometry::shortest_path(int a, int b) const {
    if (a < 0 || a >= static_cast<int>(nodes.size()) || b < 0 ||
        b >= static_cast<int>(nodes.size()))
        throw std::out_of_range("geometry: unknown node id");
    if (a == b) return 0;
    std::vector<int> dist(nodes.size(), -1);
    std::deque<int> queue{a};
    dist[a] = 0;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int u : adjacency_[v]) {
            if (dist[u] >= 0) continue;
            dist[u] = dist[v] + 1;
            if (u == b) return dist[u];
            queue.push_back(u);
        }
    }
    return -1;  // unreachable; cannot happen for connected geometries
}

MetaBuildResult build_meta_geometry(const meta_grammar::MetaRuleSet& rules, int max_tree_size) {
    if (max_tree_size < 1 || max_tree_size > 12)
        throw std::invalid_argument("build_meta_geometry: max_tree_size out of range [1,12]");
    MetaBuildResult result;
    Geometry& geo = result.geometry;
    geo.k = rules.k;
    geo.max_tree_size = max_tree_size;

    UnorderedTree root = UnorderedTree::single_node();
    GeoNode root_node;
    root_node.id = 0;
    root_node.kind = NodeKind::root;
    root_node.canonical = trees::canonical_code(root);
    root_node.tree_size = 1;
    geo.nodes.push_back(root_node);
    result.node_trees.push_back(root);
    geo.rebuild_index();

    std::set<std::pair<int, int>> edge_set;
    std::deque<int> queue{0};
    while (!queue.empty()) {
        const int vid = queue.front();
        queue.pop_front();
        const UnorderedTree t = result.node_trees[vid];
        // children of one parent are sorted by canonical code before ids are
        // assigned, making ids independent of rule enumeration order
        std::map<CanonicalCode, UnorderedTree> fresh;
        for (const auto& rule : rules.rules) {
            for (const auto& site : applicable_sites(rule, t)) {
                UnorderedTree child = apply_rule(rule, t, site);
                if (child.n > max_tree_size) continue;
                CanonicalCode code = trees::canonical_code(child);
                int existing = geo.meta_node_by_code(code);
                if (existing >= 0) {
                    auto key = std::minmax(vid, existing);
                    if (edge_set.insert(key).second) geo.add_edge(key.first, key.second);
                } else {
                    fresh.emplace(std::move(code), std::move(child));
                }
            }
        }
        for (auto& [code, child] : fresh) {
            GeoNode node;
            node.id = static_cast<int>(geo.nodes.size());
            node.kind = NodeKind::meta_tree;
            node.canonical = code;
            node.tree_size = child.n;
            geo.nodes.push_back(node);
            result.node_trees.push_back(child);
            geo.rebuild_index();
            auto key = std::minmax(vid, node.id);
            edge_set.insert(key);
            geo.add_edge(key.first, key.second);
            queue.push_back(node.id);
        }
    }
    std::sort(geo.edges.begin(), geo.edges.end());
    geo.rebuild_index();
    return result;
}

GeometryStats stats(const Geometry& geo) {
    GeometryStats s;
    for (const auto& n : geo.nodes) {
        if (n.kind == NodeKind::molecular_leaf) {
            ++s.leaf_count;
        } else {
            ++s.meta_nodes_per_size[n.tree_size];
            if (n.kind != NodeKind::root) ++s.meta_node_count;
        }
    }
    for (auto [a, b] : geo.edges) {
        if (geo.nodes[a].kind == NodeKind::molecular_leaf ||
            geo.nodes[b].kind == NodeKind::molecular_leaf)
            continue;
        ++s.edge_count;
        if (a != geo.root_id() && b != geo.root_id()) ++s.edge_count_excluding_root;
    }
    return s;
}

// ---- serialization ---------------------------------------------------------

namespace {

std::string body_text(const Geometry& geo) {
    std::ostringstream out;
    for (const auto& n : geo.nodes) {
        if (n.kind == NodeKind::molecular_leaf) continue;
        out << "N " << n.id << ' ' << (n.kind == NodeKind::root ? "root" : "meta") << ' '
            << n.tree_size << ' ' << n.canonical.hex() << '\n';
    }
    for (const auto& n : geo.nodes) {
        if (n.kind != NodeKind::molecular_leaf) continue;
        int meta = -1;
        for (auto [a, b] : geo.edges) {
            if (a == n.id) meta = b;
            if (b == n.id) meta = a;
            if (meta >= 0) break;
        }
        out << "L " << n.id << ' ' << meta << ' ' << n.mol_id << '\n';
    }
    auto edges = geo.edges;
    std::sort(edges.begin(), edges.end());
    for (auto [a, b] : edges) {
        if (geo.nodes[a].kind == NodeKind::molecular_leaf ||
            geo.nodes[b].kind == NodeKind::molecular_leaf)
            continue;  // leaf edges are implied by L lines
        out << "E " << a << ' ' << b << '\n';
    }
    return out.str();
}

}  // namespace

std::uint64_t geometry_checksum(const Geometry& geo) { return fnv1a(body_text(geo)); }

std::string serialize(const Geometry& geo) {
    std::string body = body_text(geo);
    std::ostringstream out;
    out << "GEOM v1 k=" << geo.k << " max_size=" << geo.max_tree_size << " checksum=" << std::hex
        << fnv1a(body) << '\n';
    out << body;
    return out.str();
}

Geometry deserialize(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string header;
    if (!std::getline(in, header)) throw FormatError("empty geometry file");
    int k = -1, max_size = -1;
    std::uint64_t checksum = 0;
    {
        std::istringstream hs(header);
        std::string magic, version, kv;
        hs >> magic >> version;
        if (magic != "GEOM") throw FormatError("not a geometry file");
        if (version != "v1") throw FormatError("unsupported geometry version '" + version + "'");
        while (hs >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw FormatError("malformed header field '" + kv + "'");
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "k") k = std::stoi(val);
            else if (key == "max_size") max_size = std::stoi(val);
            else if (key == "checksum") checksum = std::stoull(val, nullptr, 16);
            else throw FormatError("unknown header field '" + key + "'");
        }
        if (k < 0 || max_size < 0) throw FormatError("missing k/max_size in header");
    }
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (fnv1a(body) != checksum) throw FormatError("geometry checksum failure");

    Geometry geo;
    geo.k = k;
    geo.max_tree_size = max_size;
    std::vector<std::pair<int, int>> leaf_edges;
    std::istringstream bs(body);
    std::string line;
    int lineno = 1;
    while (std::getline(bs, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "N") {
            GeoNode n;
            std::string kind, hexcode;
            ls >> n.id >> kind >> n.tree_size >> hexcode;
            if (!ls) throw FormatError("malformed N line " + std::to_string(lineno));
            n.kind = kind == "root" ? NodeKind::root : NodeKind::meta_tree;
            if (kind != "root" && kind != "meta")
                throw FormatError("unknown node kind '" + kind + "'");
            n.canonical = CanonicalCode::from_hex(hexcode);
            if (n.id != static_cast<int>(geo.nodes.size()))
                throw FormatError("non-contiguous node id " + std::to_string(n.id));
            geo.nodes.push_back(std::move(n));
        } else if (tag == "L") {
            GeoNode n;
            int meta = -1;
            ls >> n.id >> meta;
            ls >> std::ws;
            std::getline(ls, n.mol_id);
            if (n.id < 0 || meta < 0 || n.mol_id.empty())
                throw FormatError("malformed L line " + std::to_string(lineno));
            n.kind = NodeKind::molecular_leaf;
            if (n.id != static_cast<int>(geo.nodes.size()))
                throw FormatError("non-contiguous node id " + std::to_string(n.id));
            geo.nodes.push_back(std::move(n));
            leaf_edges.push_back({meta, geo.nodes.back().id});
        } else if (tag == "E") {
            int a = -1, b = -1;
            ls >> a >> b;
            if (!ls || a >= b) throw FormatError("malformed E line " + std::to_string(lineno));
            geo.edges.push_back({a, b});
        } else {
            throw FormatError("unknown line tag '" + tag + "' at line " + std::to_string(lineno));
        }
    }
    for (auto [m, l] : leaf_edges) geo.edges.push_back({std::min(m, l), std::max(m, l)});
    std::sort(geo.edges.begin(), geo.edges.end());
    const int n = static_cast<int>(geo.nodes.size());
    for (auto [a, b] : geo.edges)
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw FormatError("dangling edge reference " + std::to_string(a) + "-" +
                              std::to_string(b));
    for (auto [m, l] : leaf_edges)
        if (geo.nodes[m].kind == NodeKind::molecular_leaf)
            throw FormatError("leaf attached to non-meta node");
    if (geo.nodes.empty() || geo.nodes[0].kind != NodeKind::root)
        throw FormatError("geometry must start with the root node");
    geo.rebuild_index();
    return geo;
}

}  // namespace geodeg::geometry
