#include "geodeg/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace geodeg::training {

using diffusion::FingerprintMap;
using mol_grammar::ThetaGrads;
using mol_grammar::ThetaParams;

void TrainConfig::validate() const {
    if (split_ratio <= 0.0 || split_ratio >= 1.0)
        throw std::invalid_argument("split_ratio must be in (0,1)");
    if (inner_epochs < 1) throw std::invalid_argument("inner_epochs must be >= 1");
    if (outer_epochs < 0) throw std::invalid_argument("outer_epochs must be >= 0");
    if (n_reinforce_samples < 1) throw std::invalid_argument("n_reinforce_samples must be >= 1");
    if (k < 1 || k > 8) throw std::invalid_argument("k must be in [1,8]");
    if (max_size < 1 || max_size > 12) throw std::invalid_argument("max_size must be in [1,12]");
    if (d < 1 || fingerprint_dim < 1) throw std::invalid_argument("dimensions must be positive");
    if (steps < 0) throw std::invalid_argument("steps must be >= 0");
    if (seeds.empty()) throw std::invalid_argument("at least one seed required");
}

// ---- dataset ---------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

LabeledDataset load_dataset_csv(const std::string& text) {
    LabeledDataset ds;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DatasetError("empty dataset");
    auto header = split_csv_row(line);
    bool has_split = false;
    if (header.size() == 4 && header[3] == "split") has_split = true;
    else if (header.size() != 3 || header[0] != "mol_id" || header[1] != "smiles" ||
             header[2] != "target")
        throw DatasetError("row 1: expected header mol_id,smiles,target[,split]");
    std::set<std::string> ids;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_row(line);
        if (cells.size() != header.size())
            throw DatasetError("row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " columns, got " +
                               std::to_string(cells.size()));
        Record r;
        r.mol_id = cells[0];
        r.smiles = cells[1];
        if (r.mol_id.empty()) throw DatasetError("row " + std::to_string(row) + ": empty mol_id");
        if (!ids.insert(r.mol_id).second)
            throw DatasetError("row " + std::to_string(row) + ": duplicate mol_id '" + r.mol_id +
                               "'");
        try {
            size_t used = 0;
            r.target = std::stod(cells[2], &used);
            if (used != cells[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw DatasetError("row " + std::to_string(row) + ": non-numeric target '" + cells[2] +
                               "'");
        }
        if (!std::isfinite(r.target))
            throw DatasetError("row " + std::to_string(row) + ": non-finite target");
        if (has_split) {
            if (cells[3] == "train") r.is_test = false;
            else if (cells[3] == "test") r.is_test = true;
            else
                throw DatasetError("row " + std::to_string(row) + ": split must be train|test");
        }
        try {
            chem::parse_smiles(r.smiles);
        } catch (const chem::ParseError& e) {
            throw DatasetError("row " + std::to_string(row) + ": bad smiles: " + e.what());
        }
        ds.records.push_back(std::move(r));
    }
    if (ds.records.empty()) throw DatasetError("dataset has no records");
    return ds;
}

LabeledDataset load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_dataset_csv(ss.str());
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        std::uint64_t seed, double ratio) {
    const size_t n = ds.records.size();
    if (n < 5) throw DatasetError("dataset too small to split (need >= 5 records)");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    for (size_t i = n - 1; i > 0; --i) {  // Fisher-Yates, platform-stable
        size_t j = rng.below(i + 1);
        std::swap(order[i], order[j]);
    }
    size_t n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(n)));
    n_train = std::clamp<size_t>(n_train, 1, n - 1);
    std::vector<char> test(n, 1);
    for (size_t i = 0; i < n_train; ++i) test[order[i]] = 0;
    LabeledDataset train, test_set;
    for (size_t i = 0; i < n; ++i)
        (test[i] ? test_set : train).records.push_back(ds.records[i]);
    return {std::move(train), std::move(test_set)};
}

// ---- REINFORCE -------------------------------------------------------------

ThetaGrads reinforce_grad(const std::vector<ReinforceSample>& samples, bool baseline) {
    if (samples.empty()) throw std::invalid_argument("reinforce_grad: no samples");
    const size_t n = samples.size();
    double total = 0.0;
    for (const auto& s : samples) total += s.loss;
    ThetaGrads grad;
    for (const auto& s : samples) {
        double b = 0.0;
        if (baseline && n >= 2) b = (total - s.loss) / static_cast<double>(n - 1);
        ThetaGrads term = s.score;
        term *= (s.loss - b) / static_cast<double>(n);
        grad += term;
    }
    return grad;
}

// ---- metrics ---------------------------------------------------------------

Metrics compute_metrics(const std::vector<double>& preds, const std::vector<double>& targets,
                        TaskKind task) {
    if (preds.size() != targets.size() || preds.size() < 2)
        throw std::invalid_argument("compute_metrics: need equal-length inputs of size >= 2");
    const size_t n = preds.size();
    Metrics m;
    double abs_sum = 0.0;
    for (size_t i = 0; i < n; ++i) abs_sum += std::abs(preds[i] - targets[i]);
    m.mae = abs_sum / static_cast<double>(n);

    double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
    double sse = 0.0, sst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sse += (preds[i] - targets[i]) * (preds[i] - targets[i]);
        sst += (targets[i] - mean) * (targets[i] - mean);
    }
    m.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);

    if (task == TaskKind::classification) {
        size_t correct = 0, pos = 0, neg = 0;
        for (size_t i = 0; i < n; ++i) {
            bool label = targets[i] >= 0.5;
            if ((preds[i] >= 0.5) == label) ++correct;
            (label ? pos : neg) += 1;
        }
        m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        if (pos > 0 && neg > 0) {
            // Mann-Whitney rank statistic with tie-averaged ranks
            std::vector<size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(),
                      [&](size_t a, size_t b) { return preds[a] < preds[b]; });
            std::vector<double> rank(n);
            size_t i = 0;
            while (i < n) {
                size_t j = i;
                while (j + 1 < n && preds[idx[j + 1]] == preds[idx[i]]) ++j;
                double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
                for (size_t t = i; t <= j; ++t) rank[idx[t]] = avg;
                i = j + 1;
            }
            double rank_pos = 0.0;
            for (size_t t = 0; t < n; ++t)
                if (targets[t] >= 0.5) rank_pos += rank[t];
            double auc = (rank_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1) / 2.0) /
                         (static_cast<double>(pos) * static_cast<double>(neg));
            m.auc = auc;
        }
    }
    return m;
}

// ---- training --------------------------------------------------------------

namespace {

struct Molecule {
    std::string mol_id;
    chem::MolecularHypergraph hypergraph;
    Eigen::VectorXd fingerprint;
    TaintedLabel label;
};

struct Prepared {
    std::vector<Molecule> molecules;       // dataset order
    std::vector<size_t> attach_order;      // indices into molecules
    std::vector<size_t> train_idx, test_idx;
};

Prepared prepare(const TrainConfig& config, const LabeledDataset& ds, std::uint64_t seed) {
    Prepared p;
    // explicit split column wins when present on every record
    bool all_explicit = !ds.records.empty();
    for (const auto& r : ds.records) all_explicit = all_explicit && r.is_test.has_value();
    std::set<std::string> test_ids;
    if (!all_explicit) {
        auto [train, test] = split_dataset(ds, seed, config.split_ratio);
        for (const auto& r : test.records) test_ids.insert(r.mol_id);
    }
    for (size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        Molecule m;
        m.mol_id = r.mol_id;
        m.hypergraph = chem::to_hypergraph(chem::parse_smiles(r.smiles));
        m.fingerprint = diffusion::leaf_fingerprint(m.hypergraph, config.fingerprint_dim);
        bool is_test = all_explicit ? *r.is_test : test_ids.count(r.mol_id) > 0;
        m.label = TaintedLabel{r.target, is_test};
        p.molecules.push_back(std::move(m));
        (is_test ? p.test_idx : p.train_idx).push_back(i);
    }
    if (p.train_idx.empty()) throw DatasetError("split produced no training records");
    for (size_t i = 0; i < p.molecules.size(); ++i) {
        if (config.mode == TrainMode::inductive && p.molecules[i].label.test) continue;
        p.attach_order.push_back(i);
    }
    return p;
}

struct EpochGeometry {
    geometry::Geometry geo;
    FingerprintMap fingerprints;
    std::vector<std::pair<int, double>> train_labels;   // (leaf id, label)
    std::map<std::string, int> leaf_of_mol;
    std::vector<std::string> excluded;
};

// decomposes + attaches each molecule; sample=false uses map_decomposition
EpochGeometry attach_all(const TrainConfig& config, const Prepared& p,
                         const geometry::Geometry& meta_geo, const ThetaParams& theta,
                         std::uint64_t seed, std::uint64_t epoch_tag, std::uint64_t sample_tag,
                         bool sample) {
    EpochGeometry out;
    out.geo = meta_geo;
    out.geo.rebuild_index();
    for (size_t i : p.attach_order) {
        const Molecule& m = p.molecules[i];
        mol_grammar::Decomposition dec;
        if (sample) {
            Rng rng(derive_seed(seed, {0x6465636fULL, epoch_tag, sample_tag, i}));
            dec = mol_grammar::sample_decomposition(m.hypergraph, theta, rng);
        } else {
            dec = mol_grammar::map_decomposition(m.hypergraph, theta);
        }
        try {
            int leaf = out.geo.attach_leaf(dec.junction_tree, m.mol_id);
            out.leaf_of_mol[m.mol_id] = leaf;
            out.fingerprints[m.mol_id] = m.fingerprint;
            if (!m.label.test) out.train_labels.push_back({leaf, m.label.train_value()});
        } catch (const geometry::NotCoveredError&) {
            if (config.policy == CoveragePolicy::error) throw;
            out.excluded.push_back(m.mol_id);
        }
    }
    return out;
}

}  // namespace

SeedResult train_one_seed(const TrainConfig& config, const LabeledDataset& ds,
                          const geometry::Geometry& meta_geo, std::uint64_t seed) {
    config.validate();
    if (meta_geo.k != config.k || meta_geo.max_tree_size != config.max_size)
        throw std::invalid_argument("meta geometry does not match config k/max_size");

    SeedResult result;
    result.seed = seed;
    Prepared p = prepare(config, ds, seed);

    const bool classification = config.task == TaskKind::classification;
    const diffusion::LossKind loss_kind =
        classification ? diffusion::LossKind::bce : config.loss_kind;

    ThetaParams theta = ThetaParams::random(derive_seed(seed, "theta-init"), 0.1);
    diffusion::DiffusionParams dparams =
        diffusion::DiffusionParams::init(meta_geo, config.d, config.fingerprint_dim, seed);
    dparams.total_time = config.total_time;
    dparams.steps = config.steps;
    dparams.scheme = config.scheme;
    dparams.mode = config.diffusivity_mode;

    diffusion::AdamState diff_adam;
    diffusion::AdamState theta_adam;
    std::set<std::string> excluded_union;

    for (int outer = 1; outer <= config.outer_epochs; ++outer) {
        // (a) re-sample decompositions and leaf attachments with current theta
        EpochGeometry epoch =
            attach_all(config, p, meta_geo, theta, seed, static_cast<std::uint64_t>(outer), 0,
                       /*sample=*/true);
        for (const auto& id : epoch.excluded) excluded_union.insert(id);

        // (b) REINFORCE update of theta at the current diffusion parameters
        if (config.lr_theta > 0.0) {
            std::vector<ReinforceSample> samples;
            for (int n = 1; n <= config.n_reinforce_samples; ++n) {
                ReinforceSample s;
                geometry::Geometry geo_n = meta_geo;
                geo_n.rebuild_index();
                FingerprintMap fps_n;
                std::vector<std::pair<int, double>> labels_n;
                for (size_t i : p.attach_order) {
                    const Molecule& m = p.molecules[i];
                    Rng rng(derive_seed(
                        seed, {0x72656e66ULL, static_cast<std::uint64_t>(outer),
                               static_cast<std::uint64_t>(n), i}));
                    auto dec = mol_grammar::sample_decomposition(m.hypergraph, theta, rng);
                    try {
                        int leaf = geo_n.attach_leaf(dec.junction_tree, m.mol_id);
                        fps_n[m.mol_id] = m.fingerprint;
                        if (!m.label.test) labels_n.push_back({leaf, m.label.train_value()});
                        auto [lp, grad] =
                            mol_grammar::log_prob_grad(theta, m.hypergraph, dec.mask_history);
                        (void)lp;
                        s.score += grad;
                    } catch (const geometry::NotCoveredError&) {
                        if (config.policy == CoveragePolicy::error) throw;
                        excluded_union.insert(m.mol_id);
                    }
                }
                if (labels_n.empty()) continue;
                Eigen::MatrixXd u0 = diffusion::encode(geo_n, dparams, fps_n);
                Eigen::MatrixXd u_t = diffusion::integrate(u0, geo_n, dparams);
                double loss = 0.0;
                for (auto [leaf, y] : labels_n) {
                    double z = u_t.row(leaf).dot(dparams.decoder_w) + dparams.decoder_b;
                    switch (loss_kind) {
                        case diffusion::LossKind::mse: loss += (z - y) * (z - y); break;
                        case diffusion::LossKind::mae: loss += std::abs(z - y); break;
                        case diffusion::LossKind::bce: {
                            double prob = 1.0 / (1.0 + std::exp(-z));
                            loss += -(y * std::log(prob + 1e-12) +
                                      (1.0 - y) * std::log(1.0 - prob + 1e-12));
                            break;
                        }
                    }
                }
                s.loss = loss / static_cast<double>(labels_n.size());
                samples.push_back(std::move(s));
            }
            if (!samples.empty()) {
                ThetaGrads grad = reinforce_grad(samples, config.baseline);
                std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> pv{
                    {"w1", {theta.w1.data(), theta.w1.size()}},
                    {"b1", {theta.b1.data(), theta.b1.size()}},
                    {"w2", {theta.w2.data(), theta.w2.size()}},
                    {"b2", {&theta.b2, 1}}};
                std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> gv{
                    {"w1", {grad.w1.data(), grad.w1.size()}},
                    {"b1", {grad.b1.data(), grad.b1.size()}},
                    {"w2", {grad.w2.data(), grad.w2.size()}},
                    {"b2", {&grad.b2, 1}}};
                diffusion::adam_step(pv, gv, config.lr_theta, theta_adam);
            }
        }

        // (c) inner loop: diffusion parameters on the fixed epoch geometry
        if (!epoch.train_labels.empty()) {
            for (int inner = 1; inner <= config.inner_epochs; ++inner) {
                auto [loss, grads] = diffusion::loss_and_grads(
                    dparams, epoch.geo, epoch.fingerprints, epoch.train_labels, loss_kind);
                diffusion::adam_step(dparams.param_views(), grads.param_views(),
                                     config.lr_diffusion, diff_adam);
                result.loss_trace.push_back(loss);
            }
        }
    }

    // final evaluation: deterministic decompositions under the trained theta
    EpochGeometry fin = attach_all(config, p, meta_geo, theta, seed, 0, 0, /*sample=*/false);
    for (const auto& id : fin.excluded) excluded_union.insert(id);

    std::map<std::string, double> pred_of;
    {
        auto preds = diffusion::forward(dparams, fin.geo, fin.fingerprints, classification);
        std::map<int, std::string> mol_of_leaf;
        for (const auto& [mol, leaf] : fin.leaf_of_mol) mol_of_leaf[leaf] = mol;
        for (auto [leaf, value] : preds) pred_of[mol_of_leaf.at(leaf)] = value;
    }
    if (config.mode == TrainMode::inductive) {
        // test molecules enter only at prediction time
        std::vector<std::pair<std::string, std::string>> id_smiles;
        for (size_t i : p.test_idx) {
            for (const auto& r : ds.records)
                if (r.mol_id == p.molecules[i].mol_id) {
                    id_smiles.push_back({r.mol_id, r.smiles});
                    break;
                }
        }
        try {
            auto preds = predict(theta, dparams, fin.geo, fin.fingerprints, id_smiles,
                                 classification);
            for (size_t q = 0; q < preds.size(); ++q) pred_of[id_smiles[q].first] = preds[q];
        } catch (const geometry::NotCoveredError&) {
            if (config.policy == CoveragePolicy::error) throw;
            // fall back to per-molecule prediction so one uncovered molecule
            // does not void the whole batch
            for (size_t q = 0; q < id_smiles.size(); ++q) {
                try {
                    auto one = predict(theta, dparams, fin.geo, fin.fingerprints,
                                       {id_smiles[q]}, classification);
                    pred_of[id_smiles[q].first] = one[0];
                } catch (const geometry::NotCoveredError&) {
                    excluded_union.insert(id_smiles[q].first);
                }
            }
        }
    }

    // metrics; the training-mean baseline uses train labels only
    double train_mean = 0.0;
    {
        double sum = 0.0;
        for (size_t i : p.train_idx) sum += p.molecules[i].label.value;
        train_mean = sum / static_cast<double>(p.train_idx.size());
    }
    std::vector<double> test_preds, test_targets, train_preds, train_targets, base_preds;
    for (size_t i : p.test_idx) {
        auto it = pred_of.find(p.molecules[i].mol_id);
        if (it == pred_of.end()) continue;  // excluded
        result.test_predictions.push_back({p.molecules[i].mol_id, it->second});
        test_preds.push_back(it->second);
        test_targets.push_back(p.molecules[i].label.value);
        base_preds.push_back(classification ? (train_mean >= 0.5 ? 1.0 : 0.0) : train_mean);
    }
    for (size_t i : p.train_idx) {
        auto it = pred_of.find(p.molecules[i].mol_id);
        if (it == pred_of.end()) continue;
        result.train_predictions.push_back({p.molecules[i].mol_id, it->second});
        train_preds.push_back(it->second);
        train_targets.push_back(p.molecules[i].label.value);
    }
    if (test_preds.size() >= 2) {
        result.test_metrics = compute_metrics(test_preds, test_targets, config.task);
        result.baseline_test_mae =
            compute_metrics(base_preds, test_targets, config.task).mae;
    }
    if (train_preds.size() >= 2)
        result.train_metrics = compute_metrics(train_preds, train_targets, config.task);
    result.excluded.assign(excluded_union.begin(), excluded_union.end());
    result.theta = std::move(theta);
    result.dparams = std::move(dparams);
    return result;
}

std::vector<double> predict(const ThetaParams& theta, const diffusion::DiffusionParams& dparams,
                            const geometry::Geometry& base_geo,
                            const FingerprintMap& base_fingerprints,
                            const std::vector<std::pair<std::string, std::string>>& id_smiles,
                            bool classification) {
    geometry::Geometry geo = base_geo;
    geo.rebuild_index();
    FingerprintMap fps = base_fingerprints;
    std::vector<int> query_leaves;
    for (const auto& [mol_id, smiles] : id_smiles) {
        auto h = chem::to_hypergraph(chem::parse_smiles(smiles));
        auto dec = mol_grammar::map_decomposition(h, theta);
        int leaf = geo.attach_leaf(dec.junction_tree, mol_id);
        query_leaves.push_back(leaf);
        fps[mol_id] = diffusion::leaf_fingerprint(h, dparams.fingerprint_dim);
    }
    Eigen::MatrixXd u0 = diffusion::encode(geo, dparams, fps);
    Eigen::MatrixXd u_t = diffusion::integrate(u0, geo, dparams);
    Eigen::VectorXd vals = diffusion::decode(u_t, query_leaves, dparams, classification);
    return {vals.data(), vals.data() + vals.size()};
}

}  // namespace geodeg::training
