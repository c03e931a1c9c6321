#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geodeg/chem.hpp"
#include "geodeg/diffusion.hpp"
#include "geodeg/geometry.hpp"
#include "geodeg/mol_grammar.hpp"

namespace geodeg::training {

enum class TaskKind { regression, classification };
enum class TrainMode { transductive, inductive };
enum class CoveragePolicy { exclude, error };

struct TrainConfig {
    int outer_epochs = 10;
    int inner_epochs = 50;
    double lr_theta = 0.01;
    double lr_diffusion = 0.001;
    int n_reinforce_samples = 4;
    bool baseline = true;
    double split_ratio = 0.8;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    TrainMode mode = TrainMode::transductive;
    TaskKind task = TaskKind::regression;
    diffusion::LossKind loss_kind = diffusion::LossKind::mse;
    CoveragePolicy policy = CoveragePolicy::exclude;

    // grammar + diffusion knobs
    int k = 4;
    int max_size = 10;
    int d = 32;
    int fingerprint_dim = 64;
    double total_time = 4.0;
    int steps = 16;
    diffusion::Scheme scheme = diffusion::Scheme::rk4;
    diffusion::Mode diffusivity_mode = diffusion::Mode::attention;

    void validate() const;  // throws std::invalid_argument
};

struct Record {
    std::string mol_id;
    std::string smiles;
    double target = 0.0;
    std::optional<bool> is_test;  // from an explicit split column
};

struct LabeledDataset {
    std::vector<Record> records;
};

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV with header mol_id,smiles,target[,split]; errors carry row numbers.
LabeledDataset load_dataset_csv(const std::string& text);
LabeledDataset load_dataset_file(const std::string& path);

// Seeded shuffle, ratio split (default 4:1), disjoint, union preserved.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        std::uint64_t seed,
                                                        double ratio = 0.8);

// A label that must never leak into training: reads for loss/gradient go
// through train_value(), which refuses test-tainted entries.
struct TaintedLabel {
    double value = 0.0;
    bool test = false;
    double train_value() const {
        if (test) throw std::logic_error("test label used in a training loss");
        return value;
    }
};

struct ReinforceSample {
    mol_grammar::ThetaGrads score;  // grad of log p(X) summed over the batch molecules
    double loss = 0.0;
};

// Score-function estimator: mean of (loss - baseline) * grad log p. The
// baseline for sample n is the mean loss of the other samples, so it stays
// independent of sample n and the estimator stays unbiased.
mol_grammar::ThetaGrads reinforce_grad(const std::vector<ReinforceSample>& samples, bool baseline);

struct Metrics {
    double mae = 0.0;
    double r2 = 0.0;
    std::optional<double> accuracy;
    std::optional<double> auc;  // null when only one class is present
};

Metrics compute_metrics(const std::vector<double>& preds, const std::vector<double>& targets,
                        TaskKind task);

struct SeedResult {
    std::uint64_t seed = 0;
    Metrics test_metrics;
    Metrics train_metrics;
    double baseline_test_mae = 0.0;  // predict-training-mean baseline
    std::vector<double> loss_trace;
    std::vector<std::string> excluded;  // NotCovered mol_ids (union over epochs)
    std::vector<std::pair<std::string, double>> test_predictions;
    std::vector<std::pair<std::string, double>> train_predictions;
    mol_grammar::ThetaParams theta;
    diffusion::DiffusionParams dparams;
};

// Block coordinate descent (outer: REINFORCE over theta; inner: gradient
// descent over the diffusion parameters) for one seed. meta_geo must be a
// leaf-free meta geometry whose k/max_size match the config.
SeedResult train_one_seed(const TrainConfig& config, const LabeledDataset& ds,
                          const geometry::Geometry& meta_geo, std::uint64_t seed);

// Inductive prediction: molecules are decomposed deterministically
// (map_decomposition), attached to a copy of the base geometry, and decoded
// after one diffusion pass. Results in input order.
std::vector<double> predict(const mol_grammar::ThetaParams& theta,
                            const diffusion::DiffusionParams& dparams,
                            const geometry::Geometry& base_geo,
                            const diffusion::FingerprintMap& base_fingerprints,
                            const std::vector<std::pair<std::string, std::string>>& id_smiles,
                            bool classification);

}  // namespace geodeg::training
