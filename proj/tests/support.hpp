#pragma once

/// @file support.hpp
/// @brief Shared fixtures and independent oracles for the test suites.
///
/// Everything here is deliberately naive: the path-sum oracle enumerates
/// directed paths one by one, and the fixed four-node instance uses small
/// integer parameters so downstream quantities are exact in doubles.

#include "lcd/align.hpp"
#include "lcd/model.hpp"

#include <vector>

namespace lcd {
namespace support {

// ---------------------------------------------------------------------------
// Path enumeration oracle
// ---------------------------------------------------------------------------

inline void collect_paths(const Dag& g, int from, int to, std::vector<int>& cur,
                          std::vector<std::vector<int>>& out) {
    cur.push_back(from);
    if (from == to) {
        out.push_back(cur);
    } else {
        for (int c : g.children(from)) collect_paths(g, c, to, cur, out);
    }
    cur.pop_back();
}

/// Sum over all directed paths from -> ... -> to of the edge weight products,
/// including the empty path when from == to. Exponential-time by design; it
/// shares no code with the linear solve it checks.
inline double path_sum(const Dag& g, const Matrix& lambda, int from, int to) {
    std::vector<std::vector<int>> paths;
    std::vector<int> cur;
    collect_paths(g, from, to, cur, paths);
    double total = 0.0;
    for (const auto& path : paths) {
        double prod = 1.0;
        for (std::size_t s = 0; s + 1 < path.size(); ++s)
            prod *= lambda(path[s + 1] - 1, path[s] - 1);
        total += prod;
    }
    return total;
}

/// Brute-force (I - Lambda)^{-1}: entry (i, j) is path_sum(j -> i).
inline Matrix path_sum_matrix(const Dag& g, const Matrix& lambda) {
    const int q = g.q();
    Matrix P(q, q);
    for (int i = 1; i <= q; ++i)
        for (int j = 1; j <= q; ++j) P(i - 1, j - 1) = path_sum(g, lambda, j, i);
    return P;
}

// ---------------------------------------------------------------------------
// Model construction with a pinned DAG and target list
// ---------------------------------------------------------------------------

/// Like sample_model but with the DAG and the context targets chosen by the
/// caller (targets may repeat, and their count need not equal q). Parameter
/// distributions match the generator.
inline LcdModel make_model(int p, const Dag& dag, InterventionKind kind, int d_star,
                           const std::vector<int>& targets, Rng& rng) {
    const int q = dag.q();
    LcdModel m;
    m.p = p;
    m.q = q;
    m.d_star = d_star;
    m.dag = dag;

    m.lambda0 = Matrix::Zero(q, q);
    for (const auto& [j, i] : dag.edges()) m.lambda0(i - 1, j - 1) = rng.uniform_signed(0.25, 1.0);

    if (q <= p) {
        Matrix Fplus(q, p);
        for (int r = 0; r < q; ++r)
            for (int c = 0; c < p; ++c) Fplus(r, c) = rng.uniform(-2.0, 2.0);
        m.F = pinv(Fplus);
    } else {
        m.F.resize(p, q);
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < q; ++c) m.F(r, c) = rng.uniform(-2.0, 2.0);
    }

    m.noise0.assign(q, NoiseSpec{NoiseSpec::unit_cumulant_theta(d_star)});

    for (int t : targets) {
        Context ctx;
        ctx.target = t;
        ctx.kind = kind;
        ctx.lambda = m.lambda0;
        if (kind == InterventionKind::perfect) {
            ctx.lambda.row(t - 1).setZero();
        } else {
            for (int j = 0; j < q; ++j)
                if (ctx.lambda(t - 1, j) != 0.0) {
                    double fresh;
                    do {
                        fresh = rng.uniform_signed(0.25, 1.0);
                    } while (fresh == m.lambda0(t - 1, j));
                    ctx.lambda(t - 1, j) = fresh;
                }
        }
        ctx.noise = m.noise0;
        ctx.noise[t - 1].theta *= rng.uniform(1.5, 2.5);
        m.contexts.push_back(std::move(ctx));
    }
    return m;
}

/// Aligned contexts straight from the model's own mixing matrices, skipping
/// decomposition and alignment. Targets keep the model's context order.
inline AlignedContexts true_aligned(const LcdModel& m) {
    AlignedContexts ac;
    ac.A.push_back(mixing_matrix(m, 0));
    for (int k = 1; k <= m.num_contexts(); ++k) {
        ac.A.push_back(mixing_matrix(m, k));
        ac.targets.push_back(m.contexts[k - 1].target);
        ac.source.push_back(k);
        ac.scalings.push_back(1.0);
        ac.sigma2.push_back(0.0);
        ac.sigma1.push_back(0.0);
    }
    return ac;
}

// ---------------------------------------------------------------------------
// Fixed four-node instance
// ---------------------------------------------------------------------------

/// Hand-picked integer instance: DAG 4 -> {2,3}, {2,3} -> 1, soft contexts
/// on nodes 1..4 changing rows 1..4 in turn. With these numbers every A^(k)
/// and every difference ratio is an exact small rational, so the soft-system
/// quantities have known integer values (see the softsys suite).
inline LcdModel example_model() {
    Dag dag(4, {{2, 1}, {3, 1}, {4, 2}, {4, 3}});
    LcdModel m;
    m.p = 4;
    m.q = 4;
    m.d_star = 3;
    m.dag = dag;
    m.F.resize(4, 4);
    m.F << 2, 6, 10, 1,
           2, 9, -3, 8,
          -8, 4, 7, 2,
          -9, 8, 2, -5;
    m.lambda0 = Matrix::Zero(4, 4);
    m.lambda0(0, 1) = 9;  // 2 -> 1
    m.lambda0(0, 2) = 3;  // 3 -> 1
    m.lambda0(1, 3) = 10; // 4 -> 2
    m.lambda0(2, 3) = 7;  // 4 -> 3
    m.noise0.assign(4, NoiseSpec{1.0});

    auto add_context = [&](int target, std::initializer_list<std::pair<int, double>> row) {
        Context ctx;
        ctx.target = target;
        ctx.kind = InterventionKind::soft;
        ctx.lambda = m.lambda0;
        for (const auto& [j, v] : row) ctx.lambda(target - 1, j - 1) = v;
        ctx.noise = m.noise0;
        ctx.noise[target - 1].theta *= 1.5;
        m.contexts.push_back(std::move(ctx));
    };
    add_context(1, {{2, -5.0}, {3, 8.0}});
    add_context(2, {{4, 2.0}});
    add_context(3, {{4, -1.0}});
    add_context(4, {});
    return m;
}

/// Chain q -> q-1 -> ... -> 1.
inline Dag chain_dag(int q) {
    std::set<Edge> edges;
    for (int j = q; j > 1; --j) edges.insert({j, j - 1});
    return Dag(q, std::move(edges));
}

} // namespace support
} // namespace lcd
