#include "geodeg/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace geodeg::diffusion {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using geometry::Geometry;
using geometry::NodeKind;

// ---- params ----------------------------------------------------------------

DiffusionParams DiffusionParams::init(const Geometry& geo, int d, int fingerprint_dim,
                                      std::uint64_t seed) {
    DiffusionParams p;
    p.d = d;
    p.fingerprint_dim = fingerprint_dim;
    Rng rng(derive_seed(seed, "diffusion-init"));
    auto fill = [&](auto& m, double scale) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-scale, scale);
    };
    // embeddings in node-id order so initialization is reproducible
    for (const auto& node : geo.nodes) {
        if (node.kind == NodeKind::molecular_leaf) continue;
        VectorXd v(d);
        for (int i = 0; i < d; ++i) v(i) = rng.uniform(-0.1, 0.1);
        p.embedding[node.canonical.bytes] = std::move(v);
    }
    p.w_leaf.resize(fingerprint_dim, d);
    fill(p.w_leaf, 0.1);
    p.b_leaf = VectorXd::Zero(d);
    p.w_key.resize(d, d);
    p.w_query.resize(d, d);
    fill(p.w_key, 1.0 / std::sqrt(static_cast<double>(d)));
    fill(p.w_query, 1.0 / std::sqrt(static_cast<double>(d)));
    p.decoder_w = VectorXd::Zero(d);
    fill(p.decoder_w, 0.1);
    p.decoder_b = 0.0;
    return p;
}

namespace {

using View = std::pair<std::string, Eigen::Map<VectorXd>>;

template <typename P>
std::vector<View> views_impl(P& p) {
    std::vector<View> out;
    for (auto& [code, vec] : p.embedding)
        out.push_back({"emb:" + to_hex(code), Eigen::Map<VectorXd>(vec.data(), vec.size())});
    out.push_back({"w_leaf", Eigen::Map<VectorXd>(p.w_leaf.data(), p.w_leaf.size())});
    out.push_back({"b_leaf", Eigen::Map<VectorXd>(p.b_leaf.data(), p.b_leaf.size())});
    out.push_back({"w_key", Eigen::Map<VectorXd>(p.w_key.data(), p.w_key.size())});
    out.push_back({"w_query", Eigen::Map<VectorXd>(p.w_query.data(), p.w_query.size())});
    out.push_back({"decoder_w", Eigen::Map<VectorXd>(p.decoder_w.data(), p.decoder_w.size())});
    out.push_back({"decoder_b", Eigen::Map<VectorXd>(&p.decoder_b, 1)});
    return out;
}

}  // namespace

std::vector<View> DiffusionParams::param_views() { return views_impl(*this); }
std::vector<View> DiffusionGrads::param_views() { return views_impl(*this); }

DiffusionGrads DiffusionGrads::zeros_like(const DiffusionParams& p) {
    DiffusionGrads g;
    for (const auto& [code, vec] : p.embedding) g.embedding[code] = VectorXd::Zero(vec.size());
    g.w_leaf = MatrixXd::Zero(p.w_leaf.rows(), p.w_leaf.cols());
    g.b_leaf = VectorXd::Zero(p.b_leaf.size());
    g.w_key = MatrixXd::Zero(p.w_key.rows(), p.w_key.cols());
    g.w_query = MatrixXd::Zero(p.w_query.rows(), p.w_query.cols());
    g.decoder_w = VectorXd::Zero(p.decoder_w.size());
    g.decoder_b = 0.0;
    return g;
}

// ---- fingerprints ----------------------------------------------------------

Eigen::VectorXd leaf_fingerprint(const chem::MolecularHypergraph& h, int fingerprint_dim,
                                 int radius) {
    const size_t n = h.atoms.size();
    // atom graph induced by the hypergraph: atoms sharing a hyperedge are adjacent
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : h.hyperedges)
        for (size_t i = 0; i < e.members.size(); ++i)
            for (size_t j = i + 1; j < e.members.size(); ++j) {
                adj[e.members[i]].push_back(e.members[j]);
                adj[e.members[j]].push_back(e.members[i]);
            }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }

    std::vector<std::uint64_t> label(n);
    for (size_t v = 0; v < n; ++v) {
        std::string base = h.atoms[v].element + (h.atoms[v].aromatic ? "|a|" : "|p|") +
                           std::to_string(h.atoms[v].formal_charge);
        label[v] = fnv1a(base);
    }
    VectorXd counts = VectorXd::Zero(fingerprint_dim);
    auto tally = [&]() {
        for (size_t v = 0; v < n; ++v) counts(label[v] % fingerprint_dim) += 1.0;
    };
    tally();
    for (int r = 0; r < radius; ++r) {
        std::vector<std::uint64_t> next(n);
        for (size_t v = 0; v < n; ++v) {
            if (adj[v].empty()) {
                next[v] = label[v];  // a lone atom's depth-r unfolding never grows
                continue;
            }
            std::vector<std::uint64_t> nb;
            for (int u : adj[v]) nb.push_back(label[u]);
            std::sort(nb.begin(), nb.end());
            std::uint64_t hash = fnv1a_u64(label[v]);
            for (auto x : nb) hash = fnv1a_u64(x, hash);
            next[v] = hash;
        }
        label = std::move(next);
        tally();
    }
    return counts.array().log1p().matrix();
}

// ---- encode ----------------------------------------------------------------

Eigen::MatrixXd encode(const Geometry& geo, const DiffusionParams& params,
                       const FingerprintMap& fingerprints) {
    const int n = static_cast<int>(geo.nodes.size());
    MatrixXd u0(n, params.d);
    for (const auto& node : geo.nodes) {
        if (node.kind == NodeKind::molecular_leaf) {
            auto it = fingerprints.find(node.mol_id);
            if (it == fingerprints.end())
                throw std::invalid_argument("encode: missing fingerprint for " + node.mol_id);
            if (it->second.size() != params.fingerprint_dim)
                throw std::invalid_argument("encode: fingerprint dimension mismatch");
            u0.row(node.id) =
                it->second.transpose() * params.w_leaf + params.b_leaf.transpose();
        } else {
            auto it = params.embedding.find(node.canonical.bytes);
            if (it == params.embedding.end())
                throw std::invalid_argument("encode: missing embedding for a meta node");
            u0.row(node.id) = it->second.transpose();
        }
    }
    return u0;
}

// ---- diffusion operator ----------------------------------------------------

namespace {

struct GeoCsr {
    int n = 0;
    std::vector<int> offsets, nbr;

    explicit GeoCsr(const Geometry& geo) {
        n = static_cast<int>(geo.nodes.size());
        offsets.assign(n + 1, 0);
        for (int v = 0; v < n; ++v) offsets[v + 1] = offsets[v] + static_cast<int>(geo.neighbors(v).size());
        nbr.reserve(offsets[n]);
        for (int v = 0; v < n; ++v)
            for (int u : geo.neighbors(v)) nbr.push_back(u);
    }
    int deg(int v) const { return offsets[v + 1] - offsets[v]; }
};

// attention weights per neighbor slot (row-softmax); uniform mode gives 1/deg
std::vector<double> edge_weights(const GeoCsr& g, const DiffusionParams& p,
                                 const MatrixXd* k_rows, const MatrixXd* q_rows) {
    std::vector<double> a(g.nbr.size(), 0.0);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(p.d));
    for (int i = 0; i < g.n; ++i) {
        const int lo = g.offsets[i], hi = g.offsets[i + 1];
        if (lo == hi) continue;
        if (p.mode == Mode::uniform) {
            for (int idx = lo; idx < hi; ++idx) a[idx] = 1.0 / (hi - lo);
            continue;
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (int idx = lo; idx < hi; ++idx) {
            double s = k_rows->row(i).dot(q_rows->row(g.nbr[idx])) * inv_sqrt_d;
            a[idx] = s;
            mx = std::max(mx, s);
        }
        double sum = 0.0;
        for (int idx = lo; idx < hi; ++idx) {
            a[idx] = std::exp(a[idx] - mx);
            sum += a[idx];
        }
        for (int idx = lo; idx < hi; ++idx) a[idx] /= sum;
    }
    return a;
}

// f(U) = (A(U) - I) U, rows of isolated nodes are zero
MatrixXd rhs(const GeoCsr& g, const MatrixXd& u, const DiffusionParams& p) {
    MatrixXd k_rows, q_rows;
    if (p.mode == Mode::attention) {
        k_rows = u * p.w_key.transpose();
        q_rows = u * p.w_query.transpose();
    }
    auto a = edge_weights(g, p, &k_rows, &q_rows);
    MatrixXd f = MatrixXd::Zero(u.rows(), u.cols());
    for (int i = 0; i < g.n; ++i) {
        const int lo = g.offsets[i], hi = g.offsets[i + 1];
        if (lo == hi) continue;
        for (int idx = lo; idx < hi; ++idx) f.row(i) += a[idx] * u.row(g.nbr[idx]);
        f.row(i) -= u.row(i);
    }
    return f;
}

// VJP of rhs at u with output cotangent grad; accumulates wk/wq gradients
MatrixXd rhs_vjp(const GeoCsr& g, const MatrixXd& u, const DiffusionParams& p,
                 const MatrixXd& grad, MatrixXd* wk_bar, MatrixXd* wq_bar) {
    MatrixXd k_rows, q_rows;
    if (p.mode == Mode::attention) {
        k_rows = u * p.w_key.transpose();
        q_rows = u * p.w_query.transpose();
    }
    auto a = edge_weights(g, p, &k_rows, &q_rows);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(p.d));

    MatrixXd u_bar = MatrixXd::Zero(u.rows(), u.cols());
    MatrixXd k_bar, q_bar;
    if (p.mode == Mode::attention) {
        k_bar = MatrixXd::Zero(u.rows(), u.cols());
        q_bar = MatrixXd::Zero(u.rows(), u.cols());
    }
    for (int i = 0; i < g.n; ++i) {
        const int lo = g.offsets[i], hi = g.offsets[i + 1];
        if (lo == hi) continue;  // zero row: no dependence on u
        u_bar.row(i) -= grad.row(i);
        // direct term: f_i += a_ij u_j
        for (int idx = lo; idx < hi; ++idx) u_bar.row(g.nbr[idx]) += a[idx] * grad.row(i);
        if (p.mode == Mode::uniform) continue;
        // softmax backward: sbar = a * (t - sum_j a t), t_ij = grad_i . u_j
        double r = 0.0;
        for (int idx = lo; idx < hi; ++idx) r += a[idx] * grad.row(i).dot(u.row(g.nbr[idx]));
        for (int idx = lo; idx < hi; ++idx) {
            const int j = g.nbr[idx];
            const double s_bar = a[idx] * (grad.row(i).dot(u.row(j)) - r) * inv_sqrt_d;
            k_bar.row(i) += s_bar * q_rows.row(j);
            q_bar.row(j) += s_bar * k_rows.row(i);
        }
    }
    if (p.mode == Mode::attention) {
        u_bar += k_bar * p.w_key + q_bar * p.w_query;
        *wk_bar += k_bar.transpose() * u;
        *wq_bar += q_bar.transpose() * u;
    }
    return u_bar;
}

void check_finite(const MatrixXd& u, int step) {
    if (!u.allFinite())
        throw DivergedError(step, "diffusion diverged at step " + std::to_string(step));
}

struct StepTrace {
    MatrixXd u;           // state entering the step
    MatrixXd y1, y2, y3;  // rk4 stage inputs
};

MatrixXd integrate_impl(const GeoCsr& g, const MatrixXd& u0, const DiffusionParams& p,
                        std::vector<StepTrace>* trace) {
    MatrixXd u = u0;
    if (p.steps <= 0 || p.total_time == 0.0) return u;
    const double h = p.total_time / p.steps;
    for (int step = 0; step < p.steps; ++step) {
        StepTrace st;
        if (trace) st.u = u;
        if (p.scheme == Scheme::euler) {
            u += h * rhs(g, u, p);
        } else {
            MatrixXd k1 = rhs(g, u, p);
            MatrixXd y1 = u + (h / 2) * k1;
            MatrixXd k2 = rhs(g, y1, p);
            MatrixXd y2 = u + (h / 2) * k2;
            MatrixXd k3 = rhs(g, y2, p);
            MatrixXd y3 = u + h * k3;
            MatrixXd k4 = rhs(g, y3, p);
            u += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
            if (trace) {
                st.y1 = std::move(y1);
                st.y2 = std::move(y2);
                st.y3 = std::move(y3);
            }
        }
        check_finite(u, step);
        if (trace) trace->push_back(std::move(st));
    }
    return u;
}

}  // namespace

SparseRows diffusivity(const MatrixXd& u, const Geometry& geo, const DiffusionParams& params) {
    GeoCsr g(geo);
    MatrixXd k_rows, q_rows;
    if (params.mode == Mode::attention) {
        k_rows = u * params.w_key.transpose();
        q_rows = u * params.w_query.transpose();
    }
    auto a = edge_weights(g, params, &k_rows, &q_rows);
    SparseRows rows;
    rows.offsets.push_back(0);
    for (int i = 0; i < g.n; ++i) {
        const int lo = g.offsets[i], hi = g.offsets[i + 1];
        if (lo == hi) {
            rows.cols.push_back(i);  // isolated node: self-entry, L row zero
            rows.weights.push_back(1.0);
        } else {
            for (int idx = lo; idx < hi; ++idx) {
                rows.cols.push_back(g.nbr[idx]);
                rows.weights.push_back(a[idx]);
            }
        }
        rows.offsets.push_back(static_cast<int>(rows.cols.size()));
    }
    return rows;
}

MatrixXd integrate(const MatrixXd& u0, const Geometry& geo, const DiffusionParams& params) {
    GeoCsr g(geo);
    return integrate_impl(g, u0, params, nullptr);
}

VectorXd decode(const MatrixXd& u_t, const std::vector<int>& leaves,
                const DiffusionParams& params, bool classification) {
    VectorXd out(leaves.size());
    for (size_t i = 0; i < leaves.size(); ++i) {
        double z = u_t.row(leaves[i]).dot(params.decoder_w) + params.decoder_b;
        out(i) = classification ? 1.0 / (1.0 + std::exp(-z)) : z;
    }
    return out;
}

std::vector<int> leaf_ids(const Geometry& geo) {
    std::vector<int> out;
    for (const auto& n : geo.nodes)
        if (n.kind == NodeKind::molecular_leaf) out.push_back(n.id);
    return out;
}

std::vector<std::pair<int, double>> forward(const DiffusionParams& params, const Geometry& geo,
                                            const FingerprintMap& fingerprints,
                                            bool classification) {
    MatrixXd u0 = encode(geo, params, fingerprints);
    MatrixXd u_t = integrate(u0, geo, params);
    auto leaves = leaf_ids(geo);
    VectorXd preds = decode(u_t, leaves, params, classification);
    std::vector<std::pair<int, double>> out;
    for (size_t i = 0; i < leaves.size(); ++i) out.push_back({leaves[i], preds(i)});
    return out;
}

std::pair<double, DiffusionGrads> loss_and_grads(DiffusionParams& params, const Geometry& geo,
                                                 const FingerprintMap& fingerprints,
                                                 const std::vector<std::pair<int, double>>& labels,
                                                 LossKind loss_kind) {
    if (labels.empty()) throw std::invalid_argument("loss_and_grads: empty train mask");
    GeoCsr g(geo);
    MatrixXd u0 = encode(geo, params, fingerprints);
    std::vector<StepTrace> trace;
    MatrixXd u_t = integrate_impl(g, u0, params, &trace);

    DiffusionGrads grads = DiffusionGrads::zeros_like(params);
    const double inv_m = 1.0 / static_cast<double>(labels.size());
    double loss = 0.0;
    MatrixXd g_t = MatrixXd::Zero(u_t.rows(), u_t.cols());
    for (auto [leaf, y] : labels) {
        const double z = u_t.row(leaf).dot(params.decoder_w) + params.decoder_b;
        double dz = 0.0;
        switch (loss_kind) {
            case LossKind::mse:
                loss += (z - y) * (z - y) * inv_m;
                dz = 2.0 * (z - y) * inv_m;
                break;
            case LossKind::mae:
                loss += std::abs(z - y) * inv_m;
                dz = (z > y ? 1.0 : z < y ? -1.0 : 0.0) * inv_m;
                break;
            case LossKind::bce: {
                const double p = 1.0 / (1.0 + std::exp(-z));
                const double eps = 1e-12;
                loss += -(y * std::log(p + eps) + (1.0 - y) * std::log(1.0 - p + eps)) * inv_m;
                dz = (p - y) * inv_m;
                break;
            }
        }
        g_t.row(leaf) += dz * params.decoder_w.transpose();
        grads.decoder_w += dz * u_t.row(leaf).transpose();
        grads.decoder_b += dz;
    }

    // reverse through the unrolled integrator
    const double h = params.steps > 0 ? params.total_time / params.steps : 0.0;
    for (int step = static_cast<int>(trace.size()) - 1; step >= 0; --step) {
        const StepTrace& st = trace[step];
        if (params.scheme == Scheme::euler) {
            // u' = u + h f(u)
            MatrixXd f_bar = h * g_t;
            g_t += rhs_vjp(g, st.u, params, f_bar, &grads.w_key, &grads.w_query);
        } else {
            const double c = h / 6.0;
            MatrixXd k1_bar = c * g_t;
            MatrixXd k2_bar = 2 * c * g_t;
            MatrixXd k3_bar = 2 * c * g_t;
            MatrixXd k4_bar = c * g_t;
            // k4 = f(y3), y3 = u + h k3
            MatrixXd y3_bar = rhs_vjp(g, st.y3, params, k4_bar, &grads.w_key, &grads.w_query);
            g_t += y3_bar;
            k3_bar += h * y3_bar;
            // k3 = f(y2), y2 = u + h/2 k2
            MatrixXd y2_bar = rhs_vjp(g, st.y2, params, k3_bar, &grads.w_key, &grads.w_query);
            g_t += y2_bar;
            k2_bar += (h / 2) * y2_bar;
            // k2 = f(y1), y1 = u + h/2 k1
            MatrixXd y1_bar = rhs_vjp(g, st.y1, params, k2_bar, &grads.w_key, &grads.w_query);
            g_t += y1_bar;
            k1_bar += (h / 2) * y1_bar;
            // k1 = f(u)
            g_t += rhs_vjp(g, st.u, params, k1_bar, &grads.w_key, &grads.w_query);
        }
    }

    // encoder backward
    for (const auto& node : geo.nodes) {
        if (node.kind == NodeKind::molecular_leaf) {
            const VectorXd& fp = fingerprints.at(node.mol_id);
            grads.w_leaf += fp * g_t.row(node.id);
            grads.b_leaf += g_t.row(node.id).transpose();
        } else {
            grads.embedding[node.canonical.bytes] += g_t.row(node.id).transpose();
        }
    }
    return {loss, std::move(grads)};
}

void adam_step(std::vector<View> params, std::vector<View> grads, double lr, AdamState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: mismatched parameter and gradient groups");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& [name, p] = params[i];
        auto& [gname, g] = grads[i];
        if (name != gname || p.size() != g.size())
            throw std::invalid_argument("adam_step: group mismatch at '" + name + "'");
        auto& [m, v] = state.moments
                           .try_emplace(name, VectorXd::Zero(p.size()), VectorXd::Zero(p.size()))
                           .first->second;
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
    }
}

}  // namespace geodeg::diffusion
