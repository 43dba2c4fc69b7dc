#pragma once

/// @file decomp.hpp
/// @brief Symmetric tensor decomposition: simultaneous diagonalization for
///        order 3 (q <= p), a diagonalization-plus-power-method hybrid for
///        order 4 (q may exceed p), and latent-count estimation from
///        flattening ranks.

#include "lcd/cumulant.hpp"
#include "lcd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcd {

enum class DecompMethod { injective, general };

/// Per-context factor matrices produced by decomposition. Column order is
/// arbitrary per context; scalings are absorbed into the columns (cube roots
/// fix signs at order 3; at order 4 the per-column sign of the weight is
/// recorded in signs).
struct FactorSet {
    int d = 3;
    std::vector<Matrix> factors;        // index k = context (0 observational)
    std::vector<Vector> signs;          // ±1 per column; all +1 for odd d
    std::vector<double> residuals;      // relative reconstruction residual
};

namespace detail {

/// Weighted least squares for the component weights: rows are packed tensor
/// entries scaled by sqrt(multiplicity), so the solve minimizes the true
/// Frobenius residual over the full tensor.
inline Vector component_weights(const SymmetricTensor& t, const Matrix& cols, int d) {
    const Eigen::Index n = static_cast<Eigen::Index>(t.packed_size());
    Matrix G(n, cols.cols());
    Vector rhs(n);
    Eigen::Index row = 0;
    SymmetricTensor::for_each_sorted(d, t.dim(), [&](const std::vector<int>& tup) {
        double sm = std::sqrt(SymmetricTensor::multiplicity(tup));
        for (Eigen::Index i = 0; i < cols.cols(); ++i) {
            double prod = 1.0;
            for (int m : tup) prod *= cols(m, i);
            G(row, i) = sm * prod;
        }
        rhs[row] = sm * t.packed()[row];
        ++row;
    });
    return G.colPivHouseholderQr().solve(rhs);
}

} // namespace detail

/// Order-3 decomposition by simultaneous diagonalization. The tensor is
/// projected onto the column space of its (1,2) flattening when q < p, two
/// random contractions S1, S2 are formed, and the eigenvectors of S1 S2^{-1}
/// give the component directions; a least-squares solve recovers the weights,
/// whose cube roots are folded into the columns. Near-degenerate or complex
/// eigenvalues trigger a retry with fresh contraction vectors.
inline Matrix jennrich_decompose(const SymmetricTensor& t, int q, Rng& rng,
                                 double tol = 1e-8, double* residual_out = nullptr) {
    if (t.order() != 3) throw std::invalid_argument("jennrich_decompose: order must be 3");
    const int p = t.dim();
    if (q < 1) throw std::invalid_argument("jennrich_decompose: rank must be positive");
    if (q > p) throw std::invalid_argument("jennrich_decompose: rank exceeds dimension");
    double tnorm = tensor_norm(t);
    if (tnorm == 0.0) throw NumericalError("jennrich_decompose: zero tensor");

    // Basis of the component span from the (1,2) flattening.
    Matrix U;
    SymmetricTensor tp(3, 1);
    if (q < p) {
        Eigen::JacobiSVD<Matrix> svd(flatten(t, 1, 2), Eigen::ComputeThinU);
        U = svd.matrixU().leftCols(q);
        tp = multilinear_transform(t, U.transpose());
    } else {
        U = Matrix::Identity(p, p);
        tp = t;
    }

    const int max_attempts = 8;
    std::string last_issue = "no attempt made";
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Vector x(q), y(q);
        for (int i = 0; i < q; ++i) x[i] = rng.normal();
        for (int i = 0; i < q; ++i) y[i] = rng.normal();
        Matrix S1 = Matrix::Zero(q, q), S2 = Matrix::Zero(q, q);
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b)
                for (int c = 0; c < q; ++c) {
                    double v = tp.at(a, b, c);
                    S1(a, b) += v * x[c];
                    S2(a, b) += v * y[c];
                }
        Eigen::FullPivLU<Matrix> lu(S2);
        if (!lu.isInvertible()) {
            last_issue = "singular contraction slice";
            continue;
        }
        Matrix W = S1 * lu.inverse();
        Eigen::EigenSolver<Matrix> es(W);
        double scale = es.eigenvalues().cwiseAbs().maxCoeff();
        if (scale == 0.0) {
            last_issue = "zero eigenvalues";
            continue;
        }
        if (es.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-8 * scale) {
            last_issue = "complex eigenvalues";
            continue;
        }
        bool collision = false;
        for (int i = 0; i < q && !collision; ++i)
            for (int j = i + 1; j < q; ++j)
                if (std::abs(es.eigenvalues()[i].real() - es.eigenvalues()[j].real()) <
                    1e-6 * scale) {
                    collision = true;
                    break;
                }
        if (collision) {
            last_issue = "eigenvalue collision";
            continue;
        }
        Matrix V = es.eigenvectors().real();
        for (int i = 0; i < q; ++i) V.col(i).normalize();

        Vector gamma = detail::component_weights(tp, V, 3);
        Matrix B(p, q);
        for (int i = 0; i < q; ++i) B.col(i) = std::cbrt(gamma[i]) * (U * V.col(i));

        double res = tensor_distance(t, rank_one_sum(3, B, Vector::Ones(q))) / tnorm;
        if (res <= tol) {
            if (residual_out) *residual_out = res;
            return B;
        }
        last_issue = "reconstruction residual " + std::to_string(res);
    }
    throw NumericalError("jennrich_decompose: retries exhausted (" + last_issue +
                         "); rank misspecified or input degenerate");
}

/// Order-4 decomposition for possibly overcomplete rank. The rank-q
/// eigenspace S of the (2,2) flattening spans {vec(b_i b_i^T)}. When q <= p
/// the components are linearly independent, so two random matricized
/// elements of S are congruent-diagonalized by the component matrix and a
/// generalized eigendecomposition recovers the directions outright. The
/// overcomplete case (and any diagonalization failure) falls back to a
/// subspace power method: the iteration x -> normalize(mat(P_S(x ⊗ x)) · x)
/// has the component directions as attractive fixed points; converged points
/// are kept only if vec(x x^T) lies in S, deduplicated by |cos|, and
/// collected from random restarts, with further starts seeded from the top
/// slice of the fit residual when small-basin components hold out. A
/// least-squares solve gives signed weights; |w|^{1/4} scales the columns
/// and sign(w) is returned separately.
inline Matrix overcomplete_decompose(const SymmetricTensor& t, int q, Rng& rng,
                                     Vector* signs_out, double tol = 1e-5,
                                     double* residual_out = nullptr) {
    if (t.order() != 4) throw std::invalid_argument("overcomplete_decompose: order must be 4");
    const int p = t.dim();
    if (q < 1) throw std::invalid_argument("overcomplete_decompose: rank must be positive");
    if (q > p * (p + 1) / 2)
        throw std::invalid_argument("overcomplete_decompose: rank exceeds generic bound");
    double tnorm = tensor_norm(t);
    if (tnorm == 0.0) throw NumericalError("overcomplete_decompose: zero tensor");

    Matrix M = flatten(t, 2, 2);
    Eigen::SelfAdjointEigenSolver<Matrix> es((M + M.transpose()) / 2.0);
    // top-q eigenvectors by absolute eigenvalue (weights may be negative)
    std::vector<int> order(static_cast<std::size_t>(es.eigenvalues().size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
    });
    Matrix S(p * p, q);
    for (int i = 0; i < q; ++i) S.col(i) = es.eigenvectors().col(order[i]);

    auto matricize = [p](const Vector& v) {
        Matrix Y(p, p);
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b) Y(a, b) = v[a * p + b];
        return Matrix((Y + Y.transpose()) / 2.0);
    };

    // Shared tail: directions -> signed weights -> folded columns; validates
    // by reconstruction residual so either search route is self-checking.
    Matrix B(p, q);
    Vector signs(q);
    double res = std::numeric_limits<double>::infinity();
    auto build = [&](const std::vector<Vector>& dirs) {
        Matrix Uc(p, q);
        for (int i = 0; i < q; ++i) Uc.col(i) = dirs[i];
        Vector w = detail::component_weights(t, Uc, 4);
        double wmax = w.cwiseAbs().maxCoeff();
        for (int i = 0; i < q; ++i)
            if (std::abs(w[i]) < 1e-12 * wmax) return false;
        for (int i = 0; i < q; ++i) {
            B.col(i) = std::pow(std::abs(w[i]), 0.25) * Uc.col(i);
            signs[i] = w[i] > 0.0 ? 1.0 : -1.0;
        }
        res = tensor_distance(t, rank_one_sum(4, B, signs)) / tnorm;
        return res <= tol;
    };
    auto deliver = [&]() {
        if (signs_out) *signs_out = signs;
        if (residual_out) *residual_out = res;
        return B;
    };

    if (q <= p) {
        // Components span a q-dimensional column space; read it off the
        // (1,3) flattening, compress, and simultaneously diagonalize two
        // random subspace elements (retrying on complex or defective
        // spectra, which the residual check also catches).
        Eigen::JacobiSVD<Matrix> colsp(flatten(t, 1, 3), Eigen::ComputeThinU);
        Matrix V = colsp.matrixU().leftCols(q);
        for (int attempt = 0; attempt < 8; ++attempt) {
            Matrix Y1 = Matrix::Zero(p, p), Y2 = Matrix::Zero(p, p);
            for (int j = 0; j < q; ++j) {
                Matrix Ej = matricize(S.col(j));
                Y1 += rng.normal() * Ej;
                Y2 += rng.normal() * Ej;
            }
            Matrix T1 = V.transpose() * Y1 * V, T2 = V.transpose() * Y2 * V;
            Eigen::FullPivLU<Matrix> lu(T2);
            if (!lu.isInvertible()) continue;
            Eigen::EigenSolver<Matrix> ew(T1 * lu.inverse());
            double scale = ew.eigenvalues().cwiseAbs().maxCoeff();
            if (scale == 0.0 || ew.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-8 * scale)
                continue;
            std::vector<Vector> dirs;
            for (int i = 0; i < q; ++i) {
                Vector x = V * ew.eigenvectors().col(i).real();
                double nrm = x.norm();
                if (nrm < 1e-12) break;
                dirs.push_back(x / nrm);
            }
            if (static_cast<int>(dirs.size()) == q && build(dirs)) return deliver();
        }
    }

    auto project_matricize = [&](const Vector& x) {
        Vector v = Vector::Zero(p * p);
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b) v[a * p + b] = x[a] * x[b];
        return matricize(S * (S.transpose() * v));
    };

    std::vector<Vector> pool;
    auto iterate_from = [&](Vector x) {
        double nrm0 = x.norm();
        if (nrm0 < 1e-14) return;
        x /= nrm0;
        for (int it = 0; it < 3000; ++it) {
            Vector xn = project_matricize(x) * x;
            double nrm = xn.norm();
            if (nrm < 1e-14) return;
            xn /= nrm;
            if (xn.dot(x) < 0.0) xn = -xn; // fold the sign ambiguity
            // Step norm, not the angle to the previous iterate: the angle
            // cosine saturates at roundoff long before the point is close
            // enough to pass the rank-one membership test below. Slow basins
            // may exhaust the budget without triggering this; the membership
            // test is the acceptance criterion either way.
            double step = (xn - x).norm();
            x = xn;
            if (step < 1e-10) break;
        }
        // keep only genuine rank-one elements of the subspace
        Vector v(p * p);
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b) v[a * p + b] = x[a] * x[b];
        if ((S * (S.transpose() * v) - v).norm() > 1e-6) return;
        // canonical sign, then deduplicate
        int lead;
        x.cwiseAbs().maxCoeff(&lead);
        if (x[lead] < 0.0) x = -x;
        for (const auto& u : pool)
            if (std::abs(u.dot(x)) > 1.0 - 1e-6) return;
        pool.push_back(x);
    };

    const int max_restarts = 120 + 80 * q;
    for (int restart = 0; restart < max_restarts && static_cast<int>(pool.size()) < q;
         ++restart) {
        Vector x(p);
        for (int i = 0; i < p; ++i) x[i] = rng.normal();
        iterate_from(x);
    }
    // Components with small basins rarely win a random start, but they
    // dominate the residual of a fit through the directions found so far;
    // seed more starts from the residual's top slice until the pool fills
    // or seeding stops producing new directions.
    for (int round = 0; round < 2 * q && static_cast<int>(pool.size()) < q; ++round) {
        SymmetricTensor R = t;
        if (!pool.empty()) {
            const int n = static_cast<int>(pool.size());
            Matrix Up(p, n);
            for (int i = 0; i < n; ++i) Up.col(i) = pool[i];
            Vector w = detail::component_weights(t, Up, 4);
            Matrix Bp(p, n);
            Vector sp(n);
            for (int i = 0; i < n; ++i) {
                Bp.col(i) = std::pow(std::abs(w[i]), 0.25) * Up.col(i);
                sp[i] = w[i] < 0.0 ? -1.0 : 1.0;
            }
            SymmetricTensor fit = rank_one_sum(4, Bp, sp);
            for (std::size_t i = 0; i < R.packed_size(); ++i)
                R.packed()[i] = t.packed()[i] - fit.packed()[i];
        }
        Matrix MR = flatten(R, 2, 2);
        Eigen::SelfAdjointEigenSolver<Matrix> er((MR + MR.transpose()) / 2.0);
        int top;
        er.eigenvalues().cwiseAbs().maxCoeff(&top);
        Matrix Y = matricize(er.eigenvectors().col(top));
        Eigen::SelfAdjointEigenSolver<Matrix> ey(Y);
        int ti;
        ey.eigenvalues().cwiseAbs().maxCoeff(&ti);
        std::size_t before = pool.size();
        iterate_from(ey.eigenvectors().col(ti));
        for (int jitter = 0; jitter < 10 && pool.size() == before; ++jitter) {
            Vector x = ey.eigenvectors().col(ti);
            for (int i = 0; i < p; ++i) x[i] += 0.2 * rng.normal();
            iterate_from(x);
        }
        if (pool.size() == before) break; // seeding stalled
    }
    if (static_cast<int>(pool.size()) < q)
        throw NumericalError("overcomplete_decompose: power iteration found only " +
                             std::to_string(pool.size()) + " of " + std::to_string(q) +
                             " components");

    if (!build(pool))
        throw NumericalError("overcomplete_decompose: reconstruction residual " +
                             std::to_string(res) + " above tolerance");
    return deliver();
}

/// Number of latent components read off the numerical rank of the informative
/// flattening: (1,2) at order 3, (2,2) at order 4.
inline int estimate_latent_count(const SymmetricTensor& t, double rel_tol = 1e-8) {
    if (t.order() == 3) return numerical_rank(flatten(t, 1, 2), rel_tol);
    if (t.order() == 4) return numerical_rank(flatten(t, 2, 2), rel_tol);
    throw std::invalid_argument("estimate_latent_count: order must be 3 or 4");
}

/// Decomposes one tensor per context with the chosen method. The injective
/// method needs order 3 and q <= p; the general method needs order 4.
inline FactorSet decompose_contexts(const std::vector<SymmetricTensor>& tensors, int q,
                                    DecompMethod method, Rng& rng,
                                    double tol_injective = 1e-8, double tol_general = 1e-5) {
    if (tensors.empty()) throw std::invalid_argument("decompose_contexts: no tensors");
    const int d = tensors.front().order(), p = tensors.front().dim();
    for (const auto& t : tensors)
        if (t.order() != d || t.dim() != p)
            throw std::invalid_argument("decompose_contexts: mixed tensor shapes");
    if (method == DecompMethod::injective && d != 3)
        throw std::invalid_argument("decompose_contexts: injective method needs order 3");
    if (method == DecompMethod::general && d != 4)
        throw std::invalid_argument("decompose_contexts: general method needs order 4");

    FactorSet fs;
    fs.d = d;
    for (const auto& t : tensors) {
        double res = 0.0;
        if (method == DecompMethod::injective) {
            fs.factors.push_back(jennrich_decompose(t, q, rng, tol_injective, &res));
            fs.signs.push_back(Vector::Ones(q));
        } else {
            Vector s;
            fs.factors.push_back(overcomplete_decompose(t, q, rng, &s, tol_general, &res));
            fs.signs.push_back(s);
        }
        fs.residuals.push_back(res);
    }
    return fs;
}

} // namespace lcd
