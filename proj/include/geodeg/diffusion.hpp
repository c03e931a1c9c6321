#pragma once

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodeg/chem.hpp"
#include "geodeg/geometry.hpp"
#include "geodeg/util.hpp"

namespace geodeg::diffusion {

enum class Scheme { euler, rk4 };
enum class Mode { attention, uniform };
enum class LossKind { mse, mae, bce };

struct DiffusionParams {
    int d = 32;
    int fingerprint_dim = 64;
    double total_time = 4.0;
    int steps = 16;
    Scheme scheme = Scheme::rk4;
    Mode mode = Mode::attention;

    // meta-node encoder: canonical code bytes -> d-vector
    std::map<std::string, Eigen::VectorXd> embedding;
    // leaf encoder: fingerprint (1xF) * w_leaf (Fxd) + b_leaf
    Eigen::MatrixXd w_leaf;
    Eigen::VectorXd b_leaf;
    // attention diffusivity
    Eigen::MatrixXd w_key, w_query;
    // decoder
    Eigen::VectorXd decoder_w;
    double decoder_b = 0.0;

    // Seeded small-uniform initialization; the embedding table covers every
    // meta node of the given geometry.
    static DiffusionParams init(const geometry::Geometry& geo, int d, int fingerprint_dim,
                                std::uint64_t seed);

    // named, ordered parameter views (used by Adam and gradient checking)
    std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> param_views();
};

struct DiffusionGrads {
    std::map<std::string, Eigen::VectorXd> embedding;
    Eigen::MatrixXd w_leaf;
    Eigen::VectorXd b_leaf;
    Eigen::MatrixXd w_key, w_query;
    Eigen::VectorXd decoder_w;
    double decoder_b = 0.0;

    static DiffusionGrads zeros_like(const DiffusionParams& p);
    std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> param_views();
};

struct DivergedError : std::runtime_error {
    int step;
    DivergedError(int s, const std::string& what) : std::runtime_error(what), step(s) {}
};

// WL-subtree fingerprint of the atom graph: labels from refinement rounds
// 0..radius hashed into F buckets, log1p-scaled counts.
Eigen::VectorXd leaf_fingerprint(const chem::MolecularHypergraph& h, int fingerprint_dim,
                                 int radius = 2);

using FingerprintMap = std::map<std::string, Eigen::VectorXd>;  // mol_id -> fingerprint

// U0: meta rows are embedding lookups, leaf rows go through the linear leaf
// encoder. Throws on a missing embedding or fingerprint.
Eigen::MatrixXd encode(const geometry::Geometry& geo, const DiffusionParams& params,
                       const FingerprintMap& fingerprints);

// Row-stochastic attention weights A on the geometry sparsity pattern
// (self-entry 1 for isolated nodes); the diffusivity operator is L = A - I.
struct SparseRows {
    std::vector<int> offsets;  // size N+1
    std::vector<int> cols;
    std::vector<double> weights;
};
SparseRows diffusivity(const Eigen::MatrixXd& u, const geometry::Geometry& geo,
                       const DiffusionParams& params);

// Fixed-step explicit integration of dU/dt = (A(U) - I) U.
Eigen::MatrixXd integrate(const Eigen::MatrixXd& u0, const geometry::Geometry& geo,
                          const DiffusionParams& params);

// Per-leaf scalar read-out; sigmoid applied when classification is set.
Eigen::VectorXd decode(const Eigen::MatrixXd& u_t, const std::vector<int>& leaf_ids,
                       const DiffusionParams& params, bool classification);

// Full forward pass; returns predictions for every leaf, in leaf id order.
std::vector<std::pair<int, double>> forward(const DiffusionParams& params,
                                            const geometry::Geometry& geo,
                                            const FingerprintMap& fingerprints,
                                            bool classification);

// Reverse accumulation through decode, the unrolled integrator (all stages),
// attention, and the encoders. labels: (leaf node id, target) for the train
// mask only.
std::pair<double, DiffusionGrads> loss_and_grads(DiffusionParams& params,
                                                 const geometry::Geometry& geo,
                                                 const FingerprintMap& fingerprints,
                                                 const std::vector<std::pair<int, double>>& labels,
                                                 LossKind loss_kind);

// Bias-corrected Adam; moments keyed by parameter-group name, lazily zeroed.
struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long t = 0;
    std::map<std::string, std::pair<Eigen::VectorXd, Eigen::VectorXd>> moments;
};

void adam_step(std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> params,
               std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> grads, double lr,
               AdamState& state);

std::vector<int> leaf_ids(const geometry::Geometry& geo);

}  // namespace geodeg::diffusion
