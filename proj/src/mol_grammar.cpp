#include "geodeg/mol_grammar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace geodeg::mol_grammar {

using chem::MolecularHypergraph;

ThetaParams::ThetaParams()
    : w1(Eigen::MatrixXd::Zero(16, 16)), b1(Eigen::VectorXd::Zero(16)),
      w2(Eigen::VectorXd::Zero(16)) {}

ThetaParams ThetaParams::random(std::uint64_t seed, double scale) {
    ThetaParams p;
    Rng rng(seed);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) p.w1(i, j) = rng.uniform(-scale, scale);
    for (int i = 0; i < 16; ++i) p.b1(i) = rng.uniform(-scale, scale);
    for (int i = 0; i < 16; ++i) p.w2(i) = rng.uniform(-scale, scale);
    p.b2 = rng.uniform(-scale, scale);
    return p;
}

double ThetaParams::f_theta(const Eigen::VectorXd& feat) const {
    Eigen::VectorXd hidden = (w1 * feat + b1).array().tanh();
    return w2.dot(hidden) + b2;
}

ThetaGrads::ThetaGrads()
    : w1(Eigen::MatrixXd::Zero(16, 16)), b1(Eigen::VectorXd::Zero(16)),
      w2(Eigen::VectorXd::Zero(16)) {}

ThetaGrads& ThetaGrads::operator+=(const ThetaGrads& o) {
    w1 += o.w1;
    b1 += o.b1;
    w2 += o.w2;
    b2 += o.b2;
    return *this;
}

ThetaGrads& ThetaGrads::operator*=(double s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    return *this;
}

static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double phi(const ThetaParams& theta, const Eigen::VectorXd& feat) {
    return sigmoid(-theta.f_theta(feat));
}

namespace {

Eigen::VectorXd feature_vector(const MolecularHypergraph& h, int edge) {
    auto f = chem::hyperedge_features(h, h.hyperedges[edge]);
    Eigen::VectorXd v(chem::kHyperedgeFeatureDim);
    for (int i = 0; i < chem::kHyperedgeFeatureDim; ++i) v(i) = f[i];
    return v;
}

std::vector<double> all_phis(const MolecularHypergraph& h, const ThetaParams& theta) {
    std::vector<double> out(h.hyperedges.size());
    for (size_t e = 0; e < h.hyperedges.size(); ++e) out[e] = phi(theta, feature_vector(h, e));
    return out;
}

// shared body of sample_decomposition / map_decomposition
Decomposition decompose(const MolecularHypergraph& h, const ThetaParams& theta, Rng* rng) {
    Decomposition d;
    const int n_edges = static_cast<int>(h.hyperedges.size());
    if (h.atoms.empty()) throw DecompositionError("empty hypergraph");
    if (n_edges == 0) {
        // single-atom molecule: one JT node, no rules
        if (h.atoms.size() != 1)
            throw DecompositionError("edge-free hypergraph with more than one atom");
        d.junction_tree = trees::UnorderedTree::single_node();
        d.jt_atoms = {{0}};
        d.jt_hyperedges = {{}};
        return d;
    }

    const auto phis = all_phis(h, theta);
    std::vector<char> edge_visited(n_edges, 0);
    std::vector<int> atom_owner(h.atoms.size(), -1);  // first JT node containing the atom
    std::vector<std::pair<int, int>> jt_edges;
    int remaining = n_edges;

    while (remaining > 0) {
        IterationRecord rec;
        std::vector<int> sampled;
        for (int e = 0; e < n_edges; ++e) {
            if (edge_visited[e]) continue;
            bool x = rng ? rng->bernoulli(phis[e]) : phis[e] >= 0.5;
            rec.draws.push_back({e, x});
            d.log_prob += x ? std::log(phis[e]) : std::log1p(-phis[e]);
            if (x) sampled.push_back(e);
        }
        if (sampled.empty()) {
            // stall guard: force the unvisited hyperedge with maximal phi
            // (ties to the lowest index); not a random draw, no log term
            int best = -1;
            for (int e = 0; e < n_edges; ++e)
                if (!edge_visited[e] && (best < 0 || phis[e] > phis[best])) best = e;
            rec.forced_edge = best;
            sampled.push_back(best);
        }
        d.mask_history.push_back(std::move(rec));

        // connected components of the sampled hyperedges, via shared atoms
        std::map<int, std::vector<int>> atom_to_sampled;
        for (int e : sampled)
            for (int v : h.hyperedges[e].members) atom_to_sampled[v].push_back(e);
        std::map<int, int> component_of;
        int n_components = 0;
        for (int e : sampled) {
            if (component_of.count(e)) continue;
            int c = n_components++;
            std::vector<int> stack{e};
            component_of[e] = c;
            while (!stack.empty()) {
                int cur = stack.back();
                stack.pop_back();
                for (int v : h.hyperedges[cur].members)
                    for (int other : atom_to_sampled[v])
                        if (!component_of.count(other)) {
                            component_of[other] = c;
                            stack.push_back(other);
                        }
            }
        }

        std::vector<std::vector<int>> comp_edges(n_components);
        for (int e : sampled) comp_edges[component_of[e]].push_back(e);

        for (int c = 0; c < n_components; ++c) {
            std::set<int> atoms;
            for (int e : comp_edges[c])
                for (int v : h.hyperedges[e].members) atoms.insert(v);
            const int jt_node = static_cast<int>(d.jt_atoms.size());

            // connect to the owner components of previously visited atoms
            std::set<int> owners;
            for (int v : atoms)
                if (atom_owner[v] >= 0) owners.insert(atom_owner[v]);
            for (int o : owners) jt_edges.push_back({o, jt_node});

            for (int v : atoms)
                if (atom_owner[v] < 0) atom_owner[v] = jt_node;
            d.jt_atoms.emplace_back(atoms.begin(), atoms.end());
            d.jt_hyperedges.push_back(comp_edges[c]);
            d.rules.push_back(construct_rule(comp_edges[c], h));
        }

        for (int e : sampled) {
            edge_visited[e] = 1;
            --remaining;
        }
    }

    const int jt_n = static_cast<int>(d.jt_atoms.size());
    if (static_cast<int>(jt_edges.size()) != jt_n - 1)
        throw DecompositionError("junction graph is not a tree (" +
                                 std::to_string(jt_edges.size()) + " edges on " +
                                 std::to_string(jt_n) + " nodes)");
    try {
        d.junction_tree = trees::UnorderedTree::from_edges(jt_n, jt_edges);
    } catch (const std::invalid_argument&) {
        throw DecompositionError("junction graph is cyclic or disconnected");
    }
    return d;
}

}  // namespace

Decomposition sample_decomposition(const MolecularHypergraph& h, const ThetaParams& theta,
                                   Rng& rng) {
    return decompose(h, theta, &rng);
}

Decomposition map_decomposition(const MolecularHypergraph& h, const ThetaParams& theta) {
    return decompose(h, theta, nullptr);
}

MolecularRule construct_rule(const std::vector<int>& component_hyperedges,
                             const MolecularHypergraph& h) {
    MolecularRule rule;
    rule.rhs_hyperedges = component_hyperedges;
    std::set<int> in_component(component_hyperedges.begin(), component_hyperedges.end());
    std::set<int> atoms;
    for (int e : component_hyperedges)
        for (int v : h.hyperedges[e].members) atoms.insert(v);
    rule.rhs_atoms.assign(atoms.begin(), atoms.end());
    // boundary atoms: touch any hyperedge outside the component
    for (int v : rule.rhs_atoms) {
        for (size_t e = 0; e < h.hyperedges.size(); ++e) {
            if (in_component.count(static_cast<int>(e))) continue;
            const auto& mem = h.hyperedges[e].members;
            if (std::binary_search(mem.begin(), mem.end(), v)) {
                rule.anchors.push_back(v);
                break;
            }
        }
    }
    return rule;
}

chem::MolecularHypergraph reconstruct(const Decomposition& d, const MolecularHypergraph& h) {
    // union of components with anchor-identified (equal-index) atoms merged
    std::set<int> atom_ids;
    std::vector<char> edge_seen(h.hyperedges.size(), 0);
    for (size_t c = 0; c < d.jt_atoms.size(); ++c) {
        for (int v : d.jt_atoms[c]) atom_ids.insert(v);
        for (int e : d.jt_hyperedges[c]) {
            if (edge_seen[e]) throw DecompositionError("hyperedge owned by two JT nodes");
            edge_seen[e] = 1;
        }
    }
    std::map<int, int> remap;
    chem::MolecularHypergraph out;
    for (int v : atom_ids) {
        remap[v] = static_cast<int>(out.atoms.size());
        chem::Atom a = h.atoms[v];
        a.index = remap[v];
        out.atoms.push_back(a);
    }
    for (size_t c = 0; c < d.jt_hyperedges.size(); ++c) {
        for (int e : d.jt_hyperedges[c]) {
            chem::Hyperedge he = h.hyperedges[e];
            for (int& v : he.members) {
                auto it = remap.find(v);
                if (it == remap.end()) throw DecompositionError("inconsistent anchors");
                v = it->second;
            }
            std::sort(he.members.begin(), he.members.end());
            out.hyperedges.push_back(std::move(he));
        }
    }
    return out;
}

double log_prob(const ThetaParams& theta, const MolecularHypergraph& h,
                const std::vector<IterationRecord>& history) {
    double lp = 0.0;
    for (const auto& rec : history) {
        for (auto [e, x] : rec.draws) {
            if (e < 0 || e >= static_cast<int>(h.hyperedges.size()))
                throw DecompositionError("mask history references unknown hyperedge");
            double p = phi(theta, feature_vector(h, e));
            lp += x ? std::log(p) : std::log1p(-p);
        }
    }
    return lp;
}

std::pair<double, ThetaGrads> log_prob_grad(const ThetaParams& theta,
                                            const MolecularHypergraph& h,
                                            const std::vector<IterationRecord>& history) {
    double lp = 0.0;
    ThetaGrads g;
    for (const auto& rec : history) {
        for (auto [e, x] : rec.draws) {
            if (e < 0 || e >= static_cast<int>(h.hyperedges.size()))
                throw DecompositionError("mask history references unknown hyperedge");
            Eigen::VectorXd feat = feature_vector(h, e);
            Eigen::VectorXd pre = theta.w1 * feat + theta.b1;
            Eigen::VectorXd hidden = pre.array().tanh();
            double f = theta.w2.dot(hidden) + theta.b2;
            double p = sigmoid(-f);
            lp += x ? std::log(p) : std::log1p(-p);
            // d(term)/dF: x=1 -> -(1-phi); x=0 -> phi
            double df = x ? -(1.0 - p) : p;
            g.b2 += df;
            g.w2 += df * hidden;
            Eigen::VectorXd dpre =
                (df * theta.w2.array() * (1.0 - hidden.array().square())).matrix();
            g.b1 += dpre;
            g.w1 += dpre * feat.transpose();
        }
    }
    return {lp, std::move(g)};
}

}  // namespace geodeg::mol_grammar
