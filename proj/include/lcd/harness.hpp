#pragma once

/// @file harness.hpp
/// @brief Benchmark orchestration, CSV and SVG emission, and the CLI.
///
/// A benchmark run samples models on a (q, replicate) grid, pushes each
/// through the requested input construction and recovery pipeline, and
/// records error metrics per replicate. Every replicate draws from its own
/// counter-derived RNG stream, so results are a pure function of the config
/// and seed regardless of thread count.

#include "lcd/align.hpp"
#include "lcd/decomp.hpp"
#include "lcd/model.hpp"
#include "lcd/recover.hpp"
#include "lcd/serialize.hpp"
#include "lcd/softsys.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace lcd {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Tolerances {
    double match = 1e-6;        // row/column matching on exact inputs
    double collinearity = 1e-6; // residual after alignment
    double edge = 0.1;          // DAG thresholding
    double rank = 1e-8;         // numerical rank decisions
};

enum class BenchMethod { general, injective };
enum class BenchInput { matrix, population_cumulant, sample_cumulant };

inline std::string method_name(BenchMethod m) {
    return m == BenchMethod::general ? "covariance-free-general" : "injective";
}

struct ExperimentConfig {
    int p = 5;
    std::vector<int> q_list;
    double rho = 0.75;
    int replicates = 50;
    std::uint64_t seed = 0;
    BenchMethod method = BenchMethod::general;
    BenchInput input = BenchInput::matrix;
    long long sample_n = 10000; // draws per context for sampled cumulants
    int d_star = 0;             // cumulant order; 0 picks 3/4 by method
    Tolerances tol;
    std::string csv_out;
    std::string svg_out;
    bool stable_timing = false; // write runtime_ms = 0 for byte-stable CSV
};

/// Fills derived defaults and rejects inconsistent combinations.
inline void validate_config(ExperimentConfig& cfg) {
    if (cfg.q_list.empty()) throw std::invalid_argument("config: empty q list");
    for (int q : cfg.q_list)
        if (q < 2) throw std::invalid_argument("config: q entries must be >= 2");
    if (cfg.p < 2) throw std::invalid_argument("config: p must be >= 2");
    if (cfg.replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
    if (cfg.method == BenchMethod::injective)
        for (int q : cfg.q_list)
            if (q > cfg.p)
                throw std::invalid_argument("config: injective method requires q <= p");
    if (cfg.d_star == 0) cfg.d_star = cfg.method == BenchMethod::injective ? 3 : 4;
    if (cfg.input != BenchInput::matrix) {
        int need = cfg.method == BenchMethod::injective ? 3 : 4;
        if (cfg.d_star != need)
            throw std::invalid_argument("config: method needs cumulant order " +
                                        std::to_string(need));
    }
    if (cfg.d_star < 3 || cfg.d_star > 4)
        throw std::invalid_argument("config: d_star must be 3 or 4");
    if (cfg.input == BenchInput::sample_cumulant && cfg.sample_n < 10)
        throw std::invalid_argument("config: sample_n too small");
}

inline ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig cfg;
    if (j.contains("p")) cfg.p = j.at("p").get<int>();
    if (j.contains("q_list")) cfg.q_list = j.at("q_list").get<std::vector<int>>();
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("method")) {
        std::string m = j.at("method").get<std::string>();
        if (m == "covariance-free-general") {
            cfg.method = BenchMethod::general;
        } else if (m == "injective") {
            cfg.method = BenchMethod::injective;
        } else {
            throw std::invalid_argument("config: unknown method '" + m + "'");
        }
    }
    if (j.contains("input")) {
        std::string s = j.at("input").get<std::string>();
        if (s == "matrix") {
            cfg.input = BenchInput::matrix;
        } else if (s == "population-cumulant") {
            cfg.input = BenchInput::population_cumulant;
        } else if (s == "sample-cumulant") {
            cfg.input = BenchInput::sample_cumulant;
        } else {
            throw std::invalid_argument("config: unknown input '" + s + "'");
        }
    }
    if (j.contains("sample_n")) cfg.sample_n = j.at("sample_n").get<long long>();
    if (j.contains("d_star")) cfg.d_star = j.at("d_star").get<int>();
    if (j.contains("tolerances")) {
        const Json& t = j.at("tolerances");
        if (t.contains("match")) cfg.tol.match = t.at("match").get<double>();
        if (t.contains("collinearity"))
            cfg.tol.collinearity = t.at("collinearity").get<double>();
        if (t.contains("edge")) cfg.tol.edge = t.at("edge").get<double>();
        if (t.contains("rank")) cfg.tol.rank = t.at("rank").get<double>();
    }
    if (j.contains("csv_out")) cfg.csv_out = j.at("csv_out").get<std::string>();
    if (j.contains("svg_out")) cfg.svg_out = j.at("svg_out").get<std::string>();
    if (j.contains("stable_timing")) cfg.stable_timing = j.at("stable_timing").get<bool>();
    return cfg;
}

// ---------------------------------------------------------------------------
// Benchmark rows
// ---------------------------------------------------------------------------

struct BenchRow {
    int q = 0;
    std::string method;
    int replicate = 0;
    double err_F = std::numeric_limits<double>::quiet_NaN();
    double err_lambda = std::numeric_limits<double>::quiet_NaN();
    int dag_err = -1; // -1 flags a failed replicate
    double runtime_ms = 0.0;

    bool ok() const { return dag_err >= 0; }
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty input");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

inline int thread_budget() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("LCD_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return hw;
}

/// Index-parallel map; the tasks own their state, results land by index, so
/// the outcome does not depend on scheduling.
template <typename Fn>
inline void parallel_for(int n, Fn&& fn) {
    int threads = std::min(thread_budget(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

/// Random signed permutation matrix (one ±1 per row and column).
inline Matrix random_signed_perm(int q, Rng& rng) {
    std::vector<int> perm(q);
    for (int i = 0; i < q; ++i) perm[i] = i;
    for (int i = q - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<int>(rng.below(i + 1))]);
    Matrix P = Matrix::Zero(q, q);
    for (int j = 0; j < q; ++j) P(perm[j], j) = (rng.next_u64() & 1) ? -1.0 : 1.0;
    return P;
}

} // namespace detail

/// Factor matrices as an exact decomposition would deliver them: mixing
/// matrices with the true per-context gauge scaling at the target and a
/// random signed column shuffle planted on each interventional context (the
/// observational context anchors the canonical labeling).
inline FactorSet exact_factor_input(const LcdModel& m, Rng& rng) {
    FactorSet fs;
    fs.d = m.d_star;
    fs.factors.push_back(mixing_matrix(m, 0));
    fs.signs.push_back(Vector::Ones(m.q));
    fs.residuals.push_back(0.0);
    for (int k = 1; k <= m.num_contexts(); ++k) {
        int t = m.contexts[k - 1].target;
        Matrix A = mixing_matrix(m, k);
        A.col(t - 1) *= m.contexts[k - 1].noise[t - 1].theta / m.noise0[t - 1].theta;
        fs.factors.push_back(A * detail::random_signed_perm(m.q, rng));
        fs.signs.push_back(Vector::Ones(m.q));
        fs.residuals.push_back(0.0);
    }
    return fs;
}

/// One full pipeline pass over a model: build the requested input, decompose
/// when needed, align, recover, and score against the model itself.
inline RecoveryResult run_pipeline(const LcdModel& m, BenchMethod method, BenchInput input,
                                   long long sample_n, const Tolerances& tol, Rng& rng) {
    FactorSet fs;
    if (input == BenchInput::matrix) {
        fs = exact_factor_input(m, rng);
    } else {
        int d = method == BenchMethod::injective ? 3 : 4;
        std::vector<SymmetricTensor> tensors;
        for (int k = 0; k <= m.num_contexts(); ++k) {
            if (input == BenchInput::population_cumulant) {
                tensors.push_back(population_cumulant(m, k, d));
            } else {
                Matrix data = sample_observations(m, k, sample_n, rng);
                tensors.push_back(sample_cumulant(data, d));
            }
        }
        double tol_dec = input == BenchInput::population_cumulant ? 1e-5 : 1e6;
        fs = decompose_contexts(tensors, m.q,
                                method == BenchMethod::injective ? DecompMethod::injective
                                                                 : DecompMethod::general,
                                rng, tol_dec, tol_dec);
    }

    RecoveryResult res;
    res.decomposition_residuals = fs.residuals;
    Matrix F_hat, lambda0_hat;
    if (method == BenchMethod::injective) {
        InjectiveAlignment ia = align_injective(fs, tol.match, true);
        auto [F, L] = recover_injective(ia.pc, ia.ac.targets, ia.P, ia.ac.scalings);
        F_hat = std::move(F);
        lambda0_hat = std::move(L);
        res.targets = ia.ac.targets;
        // A context that changed nothing (target without ancestors) leaves
        // sigma1 at roundoff level; its ratio would be noise over noise.
        double floor = 1e-12 * ia.ac.A[0].norm();
        for (int k = 1; k <= ia.ac.num_contexts(); ++k) {
            res.sigma2_ratio.push_back(
                ia.ac.sigma1[k - 1] > floor ? ia.ac.sigma2[k - 1] / ia.ac.sigma1[k - 1] : 0.0);
        }
        res.goodness = goodness_of_fit(ia.ac, perfect_context_lambdas(lambda0_hat));
    } else {
        AlignOptions opts;
        // Columns coming out of a tensor decomposition carry its error, so
        // the collinearity test must not be stricter than what the
        // decomposition delivered.
        opts.collinearity_thr = tol.collinearity;
        AlignedContexts ac;
        if (input == BenchInput::sample_cumulant) {
            // Fourth-order k-statistics are noisy enough that no single
            // residual gate fits every sample size. Retry over a fixed
            // ladder, tightest first, and give up only when the loosest
            // gate cannot produce a bijective target assignment either.
            const double ladder[] = {1e-2, 5e-2, 2e-1};
            for (std::size_t i = 0; i < std::size(ladder); ++i) {
                opts.collinearity_thr = std::max(tol.collinearity, ladder[i]);
                try {
                    ac = align_general(fs, opts);
                    break;
                } catch (const NumericalError&) {
                    if (i + 1 == std::size(ladder)) throw;
                }
            }
        } else {
            if (input == BenchInput::population_cumulant) {
                double worst = 0.0;
                for (double r : fs.residuals) worst = std::max(worst, r);
                opts.collinearity_thr =
                    std::max(opts.collinearity_thr, std::min(300.0 * worst, 1e-3));
            }
            ac = align_general(fs, opts);
        }
        lambda0_hat = recover_lambda_perfect(ac);
        F_hat = recover_F(ac, lambda0_hat);
        res.targets = ac.targets;
        double floor = 1e-12 * ac.A[0].norm();
        for (int k = 1; k <= ac.num_contexts(); ++k)
            res.sigma2_ratio.push_back(ac.sigma1[k - 1] > floor
                                           ? ac.sigma2[k - 1] / ac.sigma1[k - 1]
                                           : 0.0);
        res.goodness = goodness_of_fit(ac, perfect_context_lambdas(lambda0_hat));
    }
    res.metrics = evaluate_recovery(m, F_hat, lambda0_hat, tol.edge);
    res.F_hat = std::move(F_hat);
    res.lambda0_hat = std::move(lambda0_hat);
    res.dag_hat = res.metrics.dag_hat;
    res.dag_relaxed = res.metrics.dag_relaxed;
    return res;
}

/// Benchmark over the (q, replicate) grid. Failed replicates yield flagged
/// rows (NaN errors, dag_err -1) rather than aborting the run.
inline std::vector<BenchRow> run_benchmark(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    validate_config(cfg);
    const int nq = static_cast<int>(cfg.q_list.size());
    const int total = nq * cfg.replicates;
    std::vector<BenchRow> rows(total);
    detail::parallel_for(total, [&](int idx) {
        const int q = cfg.q_list[idx / cfg.replicates];
        const int rep = idx % cfg.replicates;
        BenchRow& row = rows[idx];
        row.q = q;
        row.method = method_name(cfg.method);
        row.replicate = rep;
        Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(q),
                               static_cast<std::uint64_t>(rep));
        auto t0 = std::chrono::steady_clock::now();
        try {
            LcdModel m = sample_model(cfg.p, q, cfg.rho, InterventionKind::perfect,
                                      cfg.d_star, rng);
            RecoveryResult res =
                run_pipeline(m, cfg.method, cfg.input, cfg.sample_n, cfg.tol, rng);
            row.err_F = res.metrics.err_F;
            row.err_lambda = res.metrics.err_lambda;
            row.dag_err = res.metrics.dag_err;
        } catch (const std::exception&) {
            // flagged row: NaN errors, dag_err stays -1
        }
        auto t1 = std::chrono::steady_clock::now();
        row.runtime_ms =
            cfg.stable_timing
                ? 0.0
                : std::chrono::duration<double, std::milli>(t1 - t0).count();
    });
    return rows;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline const char* csv_header() { return "q,method,replicate,err_F,err_lambda,dag_err,runtime_ms"; }

inline void emit_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
    out << csv_header() << '\n';
    for (const BenchRow& r : rows)
        out << r.q << ',' << r.method << ',' << r.replicate << ',' << format_double(r.err_F)
            << ',' << format_double(r.err_lambda) << ',' << r.dag_err << ','
            << format_double(r.runtime_ms) << '\n';
    if (!out) throw std::invalid_argument("write failed: " + path);
}

inline std::vector<BenchRow> parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != csv_header())
        throw std::invalid_argument("csv: unexpected header in " + path);
    std::vector<BenchRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 7) throw std::invalid_argument("csv: malformed row '" + line + "'");
        BenchRow r;
        r.q = std::stoi(fields[0]);
        r.method = fields[1];
        r.replicate = std::stoi(fields[2]);
        r.err_F = std::strtod(fields[3].c_str(), nullptr);
        r.err_lambda = std::strtod(fields[4].c_str(), nullptr);
        r.dag_err = std::stoi(fields[5]);
        r.runtime_ms = std::strtod(fields[6].c_str(), nullptr);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// SVG plot
// ---------------------------------------------------------------------------

/// Median of the chosen metric per (method, q), one polyline per method on a
/// log10 y-axis. Failed rows are excluded from medians. Static image only.
inline void emit_plot(const std::string& csv_path, const std::string& metric,
                      const std::string& svg_path) {
    if (metric != "err_F" && metric != "err_lambda" && metric != "dag_err")
        throw std::invalid_argument("plot: unknown metric '" + metric + "'");
    std::vector<BenchRow> rows = parse_csv(csv_path);
    std::map<std::string, std::map<int, std::vector<double>>> bucket;
    for (const BenchRow& r : rows) {
        if (!r.ok()) continue;
        double v = metric == "err_F" ? r.err_F
                   : metric == "err_lambda" ? r.err_lambda
                                            : static_cast<double>(r.dag_err);
        bucket[r.method][r.q].push_back(v);
    }
    if (bucket.empty()) throw std::invalid_argument("plot: no usable rows in " + csv_path);

    const double floor_val = 1e-17; // log-axis stand-in for exact zeros
    std::map<std::string, std::vector<std::pair<int, double>>> series;
    int qmin = 1 << 30, qmax = -(1 << 30);
    double lymin = 1e300, lymax = -1e300;
    for (const auto& [method, per_q] : bucket)
        for (const auto& [q, vals] : per_q) {
            double med = std::max(median(vals), floor_val);
            series[method].push_back({q, med});
            qmin = std::min(qmin, q);
            qmax = std::max(qmax, q);
            lymin = std::min(lymin, std::log10(med));
            lymax = std::max(lymax, std::log10(med));
        }
    if (qmin == qmax) {
        --qmin;
        ++qmax;
    }
    lymin = std::floor(lymin) - 0.5;
    lymax = std::ceil(lymax) + 0.5;

    const double W = 640, H = 440, L = 70, R = 150, T = 20, B = 50;
    auto xpos = [&](double q) { return L + (q - qmin) / double(qmax - qmin) * (W - L - R); };
    auto ypos = [&](double v) {
        return H - B - (std::log10(v) - lymin) / (lymax - lymin) * (H - T - B);
    };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    static const char* dashes[] = {"", "6,3", "2,2", "8,3,2,3", "4,4", "1,3"};

    std::ofstream out(svg_path);
    if (!out) throw std::invalid_argument("cannot open " + svg_path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    // axes
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\""
        << H - B << "\" stroke=\"black\"/>\n";
    // y ticks at decade powers
    for (int e = static_cast<int>(std::ceil(lymin)); e <= static_cast<int>(std::floor(lymax));
         ++e) {
        double y = ypos(std::pow(10.0, e));
        out << "<line x1=\"" << L - 4 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << L - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"11\">1e" << e << "</text>\n";
    }
    // x ticks at integer q
    for (int q = qmin; q <= qmax; ++q) {
        double x = xpos(q);
        out << "<line x1=\"" << x << "\" y1=\"" << H - B << "\" x2=\"" << x << "\" y2=\""
            << H - B + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << H - B + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << q << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">q</text>\n";
    out << "<text x=\"16\" y=\"" << (T + H - B) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (T + H - B) / 2 << ")\">median " << metric << "</text>\n";

    int si = 0;
    for (const auto& [method, pts_in] : series) {
        auto pts = pts_in;
        std::sort(pts.begin(), pts.end());
        const char* color = palette[si % 6];
        const char* dash = dashes[si % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
        if (*dash) out << " stroke-dasharray=\"" << dash << "\"";
        out << " points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) out << ' ';
            out << xpos(pts[i].first) << ',' << ypos(pts[i].second);
        }
        out << "\"/>\n";
        for (const auto& [q, v] : pts)
            out << "<circle cx=\"" << xpos(q) << "\" cy=\"" << ypos(v) << "\" r=\"2.5\" fill=\""
                << color << "\"/>\n";
        double ly = T + 16 + 18 * si;
        out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 34
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
        if (*dash) out << " stroke-dasharray=\"" << dash << "\"";
        out << "/>\n";
        out << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
            << method << "</text>\n";
        ++si;
    }
    out << "</svg>\n";
    if (!out) throw std::invalid_argument("write failed: " + svg_path);
}

} // namespace lcd
