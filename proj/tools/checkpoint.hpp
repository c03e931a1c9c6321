#pragma once

// checkpoint persistence for the CLI: versioned JSON with a dimension header,
// named row-major parameter arrays, the geometry checksum the model was
// trained against, and the RNG seed

#include <fstream>
#include <json.hpp>
#include <string>

#include "geodeg/diffusion.hpp"
#include "geodeg/mol_grammar.hpp"
#include "geodeg/util.hpp"

namespace geodeg_cli {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return a;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::MatrixXd matrix_from_json(const json& a, int rows, int cols) {
    if (static_cast<int>(a.size()) != rows * cols)
        throw std::runtime_error("checkpoint: parameter array has wrong length");
    Eigen::MatrixXd m(rows, cols);
    int at = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = a[at++].get<double>();
    return m;
}

inline Eigen::VectorXd vector_from_json(const json& a, int size) {
    if (static_cast<int>(a.size()) != size)
        throw std::runtime_error("checkpoint: parameter array has wrong length");
    Eigen::VectorXd v(size);
    for (int i = 0; i < size; ++i) v(i) = a[i].get<double>();
    return v;
}

struct Checkpoint {
    geodeg::mol_grammar::ThetaParams theta;
    geodeg::diffusion::DiffusionParams dparams;
    std::uint64_t geometry_checksum = 0;
    std::uint64_t seed = 0;
    json config;  // effective config echo
};

inline json checkpoint_to_json(const Checkpoint& ck, const std::string& timestamp) {
    json j;
    j["format"] = "geodeg-checkpoint-v1";
    j["dims"] = {{"d", ck.dparams.d}, {"fingerprint_dim", ck.dparams.fingerprint_dim}};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(ck.geometry_checksum));
    j["geometry_checksum"] = std::string(buf);
    j["seed"] = ck.seed;
    j["config"] = ck.config;
    j["theta"] = {{"w1", matrix_to_json(ck.theta.w1)},
                  {"b1", vector_to_json(ck.theta.b1)},
                  {"w2", vector_to_json(ck.theta.w2)},
                  {"b2", ck.theta.b2}};
    json emb = json::object();
    for (const auto& [code, vec] : ck.dparams.embedding)
        emb[geodeg::to_hex(code)] = vector_to_json(vec);
    j["diffusion"] = {{"embedding", emb},
                      {"w_leaf", matrix_to_json(ck.dparams.w_leaf)},
                      {"b_leaf", vector_to_json(ck.dparams.b_leaf)},
                      {"w_key", matrix_to_json(ck.dparams.w_key)},
                      {"w_query", matrix_to_json(ck.dparams.w_query)},
                      {"decoder_w", vector_to_json(ck.dparams.decoder_w)},
                      {"decoder_b", ck.dparams.decoder_b},
                      {"total_time", ck.dparams.total_time},
                      {"steps", ck.dparams.steps},
                      {"scheme", ck.dparams.scheme == geodeg::diffusion::Scheme::euler
                                     ? "euler"
                                     : "rk4"},
                      {"mode", ck.dparams.mode == geodeg::diffusion::Mode::uniform
                                   ? "uniform"
                                   : "attention"}};
    j["run"] = {{"timestamp", timestamp}};
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    if (!j.contains("format") || j["format"] != "geodeg-checkpoint-v1")
        throw std::runtime_error("checkpoint: unsupported format");
    Checkpoint ck;
    const int d = j["dims"]["d"].get<int>();
    const int fdim = j["dims"]["fingerprint_dim"].get<int>();
    ck.geometry_checksum = std::stoull(j["geometry_checksum"].get<std::string>(), nullptr, 16);
    ck.seed = j["seed"].get<std::uint64_t>();
    ck.config = j.value("config", json::object());
    ck.theta.w1 = matrix_from_json(j["theta"]["w1"], 16, 16);
    ck.theta.b1 = vector_from_json(j["theta"]["b1"], 16);
    ck.theta.w2 = vector_from_json(j["theta"]["w2"], 16);
    ck.theta.b2 = j["theta"]["b2"].get<double>();
    const auto& dj = j["diffusion"];
    ck.dparams.d = d;
    ck.dparams.fingerprint_dim = fdim;
    for (auto it = dj["embedding"].begin(); it != dj["embedding"].end(); ++it)
        ck.dparams.embedding[geodeg::from_hex(it.key())] = vector_from_json(it.value(), d);
    ck.dparams.w_leaf = matrix_from_json(dj["w_leaf"], fdim, d);
    ck.dparams.b_leaf = vector_from_json(dj["b_leaf"], d);
    ck.dparams.w_key = matrix_from_json(dj["w_key"], d, d);
    ck.dparams.w_query = matrix_from_json(dj["w_query"], d, d);
    ck.dparams.decoder_w = vector_from_json(dj["decoder_w"], d);
    ck.dparams.decoder_b = dj["decoder_b"].get<double>();
    ck.dparams.total_time = dj["total_time"].get<double>();
    ck.dparams.steps = dj["steps"].get<int>();
    ck.dparams.scheme = dj["scheme"] == "euler" ? geodeg::diffusion::Scheme::euler
                                                : geodeg::diffusion::Scheme::rk4;
    ck.dparams.mode = dj["mode"] == "uniform" ? geodeg::diffusion::Mode::uniform
                                              : geodeg::diffusion::Mode::attention;
    return ck;
}

}  // namespace geodeg_cli
