#pragma once

/// @file cli.hpp
/// @brief Subcommand dispatch for the lcd tool.
///
/// Subcommands: generate, cumulants, recover, soft-class, benchmark, plot.
/// Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include "lcd/harness.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>

namespace lcd {

namespace detail {

inline std::string dag_compact(const Dag& g) {
    std::string s;
    for (const auto& [j, i] : g.edges()) {
        if (!s.empty()) s += ",";
        s += std::to_string(j) + "->" + std::to_string(i);
    }
    return s.empty() ? "(no edges)" : s;
}

inline BenchMethod parse_method(const std::string& m) {
    if (m == "covariance-free-general" || m == "general") return BenchMethod::general;
    if (m == "injective") return BenchMethod::injective;
    throw std::invalid_argument("unknown method '" + m + "'");
}

inline BenchInput parse_input(const std::string& s) {
    if (s == "matrix") return BenchInput::matrix;
    if (s == "population-cumulant") return BenchInput::population_cumulant;
    if (s == "sample-cumulant") return BenchInput::sample_cumulant;
    throw std::invalid_argument("unknown input '" + s + "'");
}

} // namespace detail

inline int cli_dispatch(int argc, const char* const* argv) {
    CLI::App app{"Linear causal disentanglement via higher-order cumulants"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Sample a random model and write it as JSON");
    int g_p = 5, g_q = 3, g_dstar = 3;
    double g_rho = 0.75;
    std::string g_kind = "perfect", g_out = "model.json";
    std::uint64_t g_seed = 0;
    gen->add_option("--p", g_p, "Observed dimension");
    gen->add_option("--q", g_q, "Latent dimension");
    gen->add_option("--density", g_rho, "Edge probability");
    gen->add_option("--kind", g_kind, "Intervention kind: perfect or soft");
    gen->add_option("--d-star", g_dstar, "Cumulant order for the noise gauge");
    gen->add_option("--seed", g_seed, "RNG seed");
    gen->add_option("--out", g_out, "Output model JSON path");

    // cumulants
    auto* cum = app.add_subcommand("cumulants", "Write one cumulant tensor JSON per context");
    std::string c_model, c_out = "cumulant";
    int c_d = 0;
    long long c_n = 0;
    std::uint64_t c_seed = 0;
    cum->add_option("--model", c_model, "Model JSON path")->required();
    cum->add_option("--d", c_d, "Cumulant order (default: the model's d_star)");
    cum->add_option("--n", c_n, "Sample size; 0 uses exact population cumulants");
    cum->add_option("--seed", c_seed, "RNG seed for sampling");
    cum->add_option("--out", c_out, "Output prefix; files are <prefix>_<k>.json");

    // recover
    auto* rec = app.add_subcommand("recover", "Run the recovery pipeline on a model");
    std::string r_model, r_input = "matrix", r_method, r_out = "result.json";
    long long r_n = 10000;
    std::uint64_t r_seed = 0;
    rec->add_option("--model", r_model, "Model JSON path")->required();
    rec->add_option("--input", r_input, "matrix | population-cumulant | sample-cumulant");
    rec->add_option("--method", r_method,
                    "covariance-free-general | injective (default: by q vs p)");
    rec->add_option("--n", r_n, "Sample size for sample-cumulant input");
    rec->add_option("--seed", r_seed, "RNG seed");
    rec->add_option("--out", r_out, "Output result JSON path");

    // soft-class
    auto* soft = app.add_subcommand("soft-class", "List the compatible-DAG class of a DAG");
    std::string s_dag;
    std::uint64_t s_seed = 0;
    int s_cap = 6;
    soft->add_option("--dag", s_dag, "Edge list, e.g. \"3->2,2->1\"")->required();
    soft->add_option("--seed", s_seed, "RNG seed for the generic fillings");
    soft->add_option("--extra-cap", s_cap, "Cap on optional closure edges enumerated");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Run the (q, replicate) benchmark grid");
    std::string b_config, b_qlist = "2,3,4", b_method = "covariance-free-general",
                b_input = "matrix", b_out = "bench.csv", b_plot;
    int b_p = 5, b_reps = 50, b_dstar = 0;
    double b_rho = 0.75;
    long long b_n = 10000;
    std::uint64_t b_seed = 0;
    bool b_stable = false;
    bench->add_option("--config", b_config, "Config JSON (flags below override nothing if set)");
    bench->add_option("--p", b_p, "Observed dimension");
    bench->add_option("--q-list", b_qlist, "Comma-separated latent dimensions");
    bench->add_option("--density", b_rho, "Edge probability");
    bench->add_option("--replicates", b_reps, "Replicates per q");
    bench->add_option("--seed", b_seed, "RNG seed");
    bench->add_option("--method", b_method, "covariance-free-general | injective");
    bench->add_option("--input", b_input, "matrix | population-cumulant | sample-cumulant");
    bench->add_option("--n", b_n, "Sample size for sample-cumulant input");
    bench->add_option("--d-star", b_dstar, "Cumulant order (0: pick by method)");
    bench->add_option("--out", b_out, "Output CSV path");
    bench->add_option("--plot", b_plot, "Also write an err_F SVG to this path");
    bench->add_flag("--stable-timing", b_stable, "Zero runtime column for byte-stable output");

    // plot
    auto* plot = app.add_subcommand("plot", "Render a median-vs-q SVG from a benchmark CSV");
    std::string p_csv, p_metric = "err_F", p_out = "plot.svg";
    plot->add_option("--csv", p_csv, "Input CSV path")->required();
    plot->add_option("--metric", p_metric, "err_F | err_lambda | dag_err");
    plot->add_option("--out", p_out, "Output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            InterventionKind kind;
            if (g_kind == "perfect") {
                kind = InterventionKind::perfect;
            } else if (g_kind == "soft") {
                kind = InterventionKind::soft;
            } else {
                throw std::invalid_argument("unknown kind '" + g_kind + "'");
            }
            Rng rng = derive_stream(g_seed, 0, 0);
            LcdModel m = sample_model(g_p, g_q, g_rho, kind, g_dstar, rng);
            save_json(g_out, model_to_json(m));
            std::cout << "wrote " << g_out << " (p=" << g_p << ", q=" << g_q << ", "
                      << m.dag.edges().size() << " edges)\n";
        } else if (cum->parsed()) {
            LcdModel m = model_from_json(load_json(c_model));
            int d = c_d == 0 ? m.d_star : c_d;
            Rng rng = derive_stream(c_seed, 1, 0);
            for (int k = 0; k <= m.num_contexts(); ++k) {
                SymmetricTensor t = c_n == 0
                                        ? population_cumulant(m, k, d)
                                        : sample_cumulant(sample_observations(m, k, c_n, rng), d);
                std::string path = c_out + "_" + std::to_string(k) + ".json";
                save_json(path, tensor_to_json(t));
                std::cout << "wrote " << path << '\n';
            }
        } else if (rec->parsed()) {
            LcdModel m = model_from_json(load_json(r_model));
            BenchMethod method = r_method.empty()
                                     ? (m.q <= m.p ? BenchMethod::injective
                                                   : BenchMethod::general)
                                     : detail::parse_method(r_method);
            Rng rng = derive_stream(r_seed, 2, 0);
            Tolerances tol;
            RecoveryResult res =
                run_pipeline(m, method, detail::parse_input(r_input), r_n, tol, rng);
            save_json(r_out, result_to_json(res));
            std::cout << "wrote " << r_out << " (err_F=" << res.metrics.err_F
                      << ", err_lambda=" << res.metrics.err_lambda
                      << ", dag_err=" << res.metrics.dag_err << ")\n";
        } else if (soft->parsed()) {
            Dag g = dag_from_text(s_dag);
            Rng rng = derive_stream(s_seed, 3, 0);
            std::vector<Dag> members = soft_compatible_class(g, rng, 3, s_cap);
            std::set<Dag> in_class(members.begin(), members.end());
            Matrix D = random_context_deltas(g, rng);
            for (const Dag& cand : same_closure_dags(g, s_cap)) {
                std::cout << (in_class.count(cand) ? "in-class " : "excluded ")
                          << detail::dag_compact(cand) << "  [";
                for (int j = 1; j <= g.q(); ++j) {
                    NodeRankPair pr = closure_rank_pair(D, cand, j);
                    int cj = pr.rank_children == pr.rank_with_self
                                 ? pr.cols - pr.rank_children
                                 : -1;
                    if (j > 1) std::cout << "; ";
                    std::cout << "node " << j << ": rank=" << pr.rank_children
                              << " aug=" << pr.rank_with_self << " c=" << cj;
                }
                std::cout << "]\n";
            }
        } else if (bench->parsed()) {
            ExperimentConfig cfg;
            if (!b_config.empty()) {
                cfg = config_from_json(load_json(b_config));
            } else {
                cfg.p = b_p;
                cfg.q_list.clear();
                std::stringstream ss(b_qlist);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    try {
                        cfg.q_list.push_back(std::stoi(tok));
                    } catch (const std::exception&) {
                        throw std::invalid_argument("--q-list expects comma-separated integers, got '" + tok + "'");
                    }
                }
                cfg.rho = b_rho;
                cfg.replicates = b_reps;
                cfg.seed = b_seed;
                cfg.method = detail::parse_method(b_method);
                cfg.input = detail::parse_input(b_input);
                cfg.sample_n = b_n;
                cfg.d_star = b_dstar;
                cfg.csv_out = b_out;
                cfg.svg_out = b_plot;
                cfg.stable_timing = b_stable;
            }
            if (cfg.csv_out.empty()) cfg.csv_out = b_out;
            std::vector<BenchRow> rows = run_benchmark(cfg);
            emit_csv(rows, cfg.csv_out);
            std::cout << "wrote " << cfg.csv_out << " (" << rows.size() << " rows)\n";
            if (!cfg.svg_out.empty()) {
                emit_plot(cfg.csv_out, "err_F", cfg.svg_out);
                std::cout << "wrote " << cfg.svg_out << '\n';
            }
        } else if (plot->parsed()) {
            emit_plot(p_csv, p_metric, p_out);
            std::cout << "wrote " << p_out << '\n';
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace lcd
