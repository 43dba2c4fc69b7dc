#pragma once

/// @file serialize.hpp
/// @brief JSON round trips for models, tensors and recovery results.
///
/// Matrices are stored as flat row-major arrays; shapes come from the
/// enclosing object. Doubles survive the round trip exactly (the writer
/// emits shortest-round-trip decimal).

#include "lcd/cumulant.hpp"
#include "lcd/model.hpp"
#include "lcd/recover.hpp"

#include "json.hpp"

#include <fstream>
#include <string>

namespace lcd {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
    Json arr = Json::array();
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    return arr;
}

inline Matrix matrix_from_json(const Json& j, int rows, int cols, const char* what) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows * cols)
        throw std::invalid_argument(std::string(what) + ": expected " +
                                    std::to_string(rows * cols) + " entries");
    Matrix m(rows, cols);
    int idx = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j.at(idx++).get<double>();
    return m;
}

inline Json model_to_json(const LcdModel& model) {
    Json j;
    j["p"] = model.p;
    j["q"] = model.q;
    Json edges = Json::array();
    for (const auto& [from, to] : model.dag.edges()) edges.push_back({from, to});
    j["edges"] = edges;
    j["F"] = matrix_to_json(model.F);
    j["lambda0"] = matrix_to_json(model.lambda0);
    j["d_star"] = model.d_star;
    Json contexts = Json::array();
    for (const Context& ctx : model.contexts) {
        Json c;
        c["target"] = ctx.target;
        c["kind"] = ctx.kind == InterventionKind::perfect ? "perfect" : "soft";
        c["lambda"] = matrix_to_json(ctx.lambda);
        Json noise = Json::array();
        for (const NoiseSpec& ns : ctx.noise) noise.push_back({{"theta", ns.theta}});
        c["noise"] = noise;
        contexts.push_back(std::move(c));
    }
    j["contexts"] = contexts;
    return j;
}

/// Rebuilds a model. The baseline noise is not stored separately: contexts
/// only touch their own target's noise, so every coordinate is read from a
/// context targeting some other node, and all such reads must agree.
inline LcdModel model_from_json(const Json& j) {
    LcdModel model;
    model.p = j.at("p").get<int>();
    model.q = j.at("q").get<int>();
    if (model.p < 1 || model.q < 1) throw std::invalid_argument("model: p, q must be positive");
    std::set<Edge> edges;
    for (const Json& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw std::invalid_argument("model: bad edge entry");
        edges.insert({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    model.dag = Dag(model.q, std::move(edges));
    model.F = matrix_from_json(j.at("F"), model.p, model.q, "model.F");
    model.lambda0 = matrix_from_json(j.at("lambda0"), model.q, model.q, "model.lambda0");
    model.d_star = j.at("d_star").get<int>();
    if (model.d_star < 3) throw std::invalid_argument("model: d_star must be at least 3");
    for (const Json& c : j.at("contexts")) {
        Context ctx;
        ctx.target = c.at("target").get<int>();
        if (ctx.target < 1 || ctx.target > model.q)
            throw std::invalid_argument("model: context target out of range");
        std::string kind = c.at("kind").get<std::string>();
        if (kind == "perfect") {
            ctx.kind = InterventionKind::perfect;
        } else if (kind == "soft") {
            ctx.kind = InterventionKind::soft;
        } else {
            throw std::invalid_argument("model: unknown intervention kind '" + kind + "'");
        }
        ctx.lambda = matrix_from_json(c.at("lambda"), model.q, model.q, "context.lambda");
        const Json& noise = c.at("noise");
        if (static_cast<int>(noise.size()) != model.q)
            throw std::invalid_argument("model: context noise must list q entries");
        for (const Json& n : noise) ctx.noise.push_back({n.at("theta").get<double>()});
        model.contexts.push_back(std::move(ctx));
    }
    if (model.contexts.empty()) throw std::invalid_argument("model: no contexts");
    model.noise0.assign(model.q, NoiseSpec{0.0});
    std::vector<char> seen(model.q, 0);
    for (const Context& ctx : model.contexts) {
        for (int i = 0; i < model.q; ++i) {
            if (i + 1 == ctx.target) continue;
            double theta = ctx.noise[i].theta;
            if (!seen[i]) {
                model.noise0[i].theta = theta;
                seen[i] = 1;
            } else if (std::abs(theta - model.noise0[i].theta) >
                       1e-12 * std::max(1.0, std::abs(theta))) {
                throw std::invalid_argument("model: contexts disagree on baseline noise");
            }
        }
    }
    for (int i = 0; i < model.q; ++i)
        if (!seen[i]) throw std::invalid_argument("model: baseline noise not determined");
    return model;
}

inline Json tensor_to_json(const SymmetricTensor& t) {
    Json j;
    j["d"] = t.order();
    j["p"] = t.dim();
    Json packed = Json::array();
    for (double v : t.packed()) packed.push_back(v);
    j["packed"] = packed;
    return j;
}

inline SymmetricTensor tensor_from_json(const Json& j) {
    int d = j.at("d").get<int>();
    int p = j.at("p").get<int>();
    SymmetricTensor t(d, p);
    const Json& packed = j.at("packed");
    if (packed.size() != t.packed_size())
        throw std::invalid_argument("tensor: packed length does not match d, p");
    for (std::size_t i = 0; i < t.packed_size(); ++i)
        t.packed()[i] = packed.at(i).get<double>();
    return t;
}

inline Json result_to_json(const RecoveryResult& res) {
    Json j;
    j["F_hat"] = matrix_to_json(res.F_hat);
    j["lambda0_hat"] = matrix_to_json(res.lambda0_hat);
    Json edges = Json::array();
    for (const auto& [from, to] : res.dag_hat.edges()) edges.push_back({from, to});
    j["edges_hat"] = edges;
    j["targets"] = res.targets;
    j["residuals"] = res.decomposition_residuals;
    j["metrics"] = {{"err_F", res.metrics.err_F},
                    {"err_lambda", res.metrics.err_lambda},
                    {"dag_err", res.metrics.dag_err}};
    return j;
}

inline Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    Json j;
    in >> j;
    return j;
}

inline void save_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

} // namespace lcd
