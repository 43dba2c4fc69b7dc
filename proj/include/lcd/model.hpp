#pragma once

/// @file model.hpp
/// @brief Generative model: mixing matrix F, edge weights Λ^(k) per context,
///        non-Gaussian noise, intervention bookkeeping, exact mixing matrices,
///        data sampling and population cumulants.

#include "lcd/cumulant.hpp"
#include "lcd/graph.hpp"
#include "lcd/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lcd {

/// Centered exponential noise with scale theta: theta * (E - 1), E standard
/// exponential. Every cumulant of order >= 2 is nonzero:
/// kappa_d = (d-1)! * theta^d.
struct NoiseSpec {
    double theta = 1.0;

    double cumulant(int d) const {
        if (d < 1) throw std::invalid_argument("NoiseSpec::cumulant: bad order");
        if (d == 1) return 0.0;
        double f = 1.0;
        for (int m = 2; m < d; ++m) f *= m;
        return f * std::pow(theta, d);
    }

    double sample(Rng& rng) const { return theta * (rng.exponential() - 1.0); }

    /// Scale making kappa_{d} equal exactly 1: ((d-1)!)^{-1/d}.
    static double unit_cumulant_theta(int d) {
        double f = 1.0;
        for (int m = 2; m < d; ++m) f *= m;
        return std::pow(f, -1.0 / d);
    }
};

enum class InterventionKind { perfect, soft };

/// One interventional regime: target node, edge weights and noise for that
/// context. Row target-1 of lambda is all zero (perfect) or entrywise changed
/// on the support (soft); noise agrees with the observational one except at
/// the target.
struct Context {
    int target = 0; // node label, 1-based
    InterventionKind kind = InterventionKind::perfect;
    Matrix lambda;
    std::vector<NoiseSpec> noise;
};

/// Full generative model. Weight convention: lambda(i-1, j-1) is the weight
/// of edge j -> i, so support(lambda0) matches dag.edges() exactly.
struct LcdModel {
    int p = 0, q = 0;
    Dag dag{1};
    Matrix F;
    Matrix lambda0;
    std::vector<NoiseSpec> noise0;
    std::vector<Context> contexts; // context k lives at index k-1
    int d_star = 3;

    const Matrix& lambda(int k) const {
        check_context(k);
        return k == 0 ? lambda0 : contexts[k - 1].lambda;
    }
    const std::vector<NoiseSpec>& noise(int k) const {
        check_context(k);
        return k == 0 ? noise0 : contexts[k - 1].noise;
    }
    int num_contexts() const { return static_cast<int>(contexts.size()); }

    void check_context(int k) const {
        if (k < 0 || k > num_contexts())
            throw std::invalid_argument("LcdModel: context index out of range");
    }
};

/// A^(k) = F (I - Λ^(k))^{-1}, computed by a linear solve rather than an
/// explicit inverse. Entry (i,j) of (I-Λ)^{-1} equals the sum over directed
/// paths j -> ... -> i of the edge weight products.
inline Matrix mixing_matrix(const LcdModel& m, int k) {
    const Matrix& L = m.lambda(k);
    Matrix ImL = Matrix::Identity(m.q, m.q) - L;
    Eigen::PartialPivLU<Matrix> lu(ImL.transpose());
    if (std::abs(lu.determinant()) < 1e-12)
        throw NumericalError("mixing_matrix: I - lambda is singular (corrupt input)");
    // A = F (I-Λ)^{-1}  <=>  (I-Λ)ᵀ Aᵀ = Fᵀ
    return lu.solve(m.F.transpose()).transpose();
}

/// Random model generator. One context per latent node; context k targets
/// node k. In the canonical gauge the observational noise satisfies
/// kappa_{d_star} = 1 exactly and the intervened noise scale is multiplied by
/// a factor in [1.5, 2.5], keeping its cumulant away from {0, ±1}.
/// For q <= p the mixing matrix is the pseudo-inverse of a random q x p
/// matrix with Unif([-2,2]) entries; for q > p its entries are sampled
/// directly. Nonzero edge weights are Unif(±[0.25, 1]).
inline LcdModel sample_model(int p, int q, double rho, InterventionKind kind, int d_star,
                             Rng& rng) {
    if (p < 2 || q < 2) throw std::invalid_argument("sample_model: p and q must be >= 2");
    if (d_star < 2 || d_star > 4) throw std::invalid_argument("sample_model: d_star must be 2..4");
    LcdModel m;
    m.p = p;
    m.q = q;
    m.d_star = d_star;
    m.dag = sample_dag(q, rho, rng);

    m.lambda0 = Matrix::Zero(q, q);
    for (const auto& [j, i] : m.dag.edges()) m.lambda0(i - 1, j - 1) = rng.uniform_signed(0.25, 1.0);

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

    for (int k = 1; k <= q; ++k) {
        Context ctx;
        ctx.target = k;
        ctx.kind = kind;
        ctx.lambda = m.lambda0;
        if (kind == InterventionKind::perfect) {
            ctx.lambda.row(k - 1).setZero();
        } else {
            for (int j = 0; j < q; ++j)
                if (ctx.lambda(k - 1, j) != 0.0) {
                    double fresh;
                    do {
                        fresh = rng.uniform_signed(0.25, 1.0);
                    } while (fresh == m.lambda0(k - 1, j));
                    ctx.lambda(k - 1, j) = fresh;
                }
        }
        ctx.noise = m.noise0;
        ctx.noise[k - 1].theta *= rng.uniform(1.5, 2.5);
        m.contexts.push_back(std::move(ctx));
    }
    return m;
}

/// n i.i.d. rows of A^(k) ε^(k) with independent noise coordinates.
inline Matrix sample_observations(const LcdModel& m, int k, Eigen::Index n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_observations: n must be positive");
    Matrix A = mixing_matrix(m, k);
    const auto& noise = m.noise(k);
    Matrix out(n, m.p);
    Vector eps(m.q);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (int i = 0; i < m.q; ++i) eps[i] = noise[i].sample(rng);
        out.row(r) = (A * eps).transpose();
    }
    return out;
}

/// Exact order-d cumulant of X^(k): Σ_i kappa_d(ε_i^(k)) a_i^{⊗d} with a_i the
/// columns of A^(k).
inline SymmetricTensor population_cumulant(const LcdModel& m, int k, int d) {
    if (d < 2 || d > 4) throw std::invalid_argument("population_cumulant: unsupported order");
    Matrix A = mixing_matrix(m, k);
    const auto& noise = m.noise(k);
    Vector w(m.q);
    for (int i = 0; i < m.q; ++i) w[i] = noise[i].cumulant(d);
    return rank_one_sum(d, A, w);
}

} // namespace lcd
