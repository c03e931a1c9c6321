#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodeg/chem.hpp"
#include "geodeg/trees.hpp"
#include "geodeg/util.hpp"

namespace geodeg::mol_grammar {

// Two-layer MLP over hyperedge features; phi(e) = sigmoid(-F_theta(f(e))).
struct ThetaParams {
    Eigen::MatrixXd w1;  // 16x16
    Eigen::VectorXd b1;  // 16
    Eigen::VectorXd w2;  // 16
    double b2 = 0.0;

    ThetaParams();
    static ThetaParams random(std::uint64_t seed, double scale = 0.1);

    double f_theta(const Eigen::VectorXd& feat) const;
};

struct ThetaGrads {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;
    double b2 = 0.0;

    ThetaGrads();
    ThetaGrads& operator+=(const ThetaGrads& o);
    ThetaGrads& operator*=(double s);
};

double phi(const ThetaParams& theta, const Eigen::VectorXd& feat);

// One rule per sampled connected component. Atoms keep their source-molecule
// indices; anchor atoms are the ones shared with hyperedges outside the
// component.
struct MolecularRule {
    std::vector<int> rhs_atoms;        // component atoms (source indices)
    std::vector<int> rhs_hyperedges;   // indices into the source hypergraph
    std::vector<int> anchors;          // subset of rhs_atoms
};

// One Bernoulli draw: x recorded for every unvisited hyperedge of the
// iteration; a forced pick (stall guard) carries no probability term.
struct IterationRecord {
    std::vector<std::pair<int, bool>> draws;  // (hyperedge index, sampled bit)
    std::optional<int> forced_edge;
};

struct Decomposition {
    trees::UnorderedTree junction_tree;
    std::vector<std::vector<int>> jt_atoms;       // per JT node: atom indices
    std::vector<std::vector<int>> jt_hyperedges;  // per JT node: owned hyperedges
    std::vector<MolecularRule> rules;
    std::vector<IterationRecord> mask_history;
    double log_prob = 0.0;
};

struct DecompositionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative Bernoulli contraction (components of sampled hyperedges become
// junction-tree nodes). Junction-tree edges go from each new component to the
// owner components of its previously visited atoms, which keeps the junction
// graph a tree on molecule-like hypergraphs; a cycle raises
// DecompositionError. Single-atom molecules yield one JT node and no rules.
Decomposition sample_decomposition(const chem::MolecularHypergraph& h, const ThetaParams& theta,
                                   Rng& rng);

// Deterministic variant: x_e = 1 iff phi(e) >= 0.5, same stall guard.
Decomposition map_decomposition(const chem::MolecularHypergraph& h, const ThetaParams& theta);

MolecularRule construct_rule(const std::vector<int>& component_hyperedges,
                             const chem::MolecularHypergraph& h);

// Union of the decomposition's components with anchor-identified atoms
// merged; the executable completeness witness.
chem::MolecularHypergraph reconstruct(const Decomposition& d, const chem::MolecularHypergraph& h);

// Recomputes sum of Bernoulli log-terms from a mask history; also its theta
// gradient (chain rule through phi and the MLP).
double log_prob(const ThetaParams& theta, const chem::MolecularHypergraph& h,
                const std::vector<IterationRecord>& history);
std::pair<double, ThetaGrads> log_prob_grad(const ThetaParams& theta,
                                            const chem::MolecularHypergraph& h,
                                            const std::vector<IterationRecord>& history);

}  // namespace geodeg::mol_grammar
