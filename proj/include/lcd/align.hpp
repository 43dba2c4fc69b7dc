#pragma once

/// @file align.hpp
/// @brief Cross-context alignment: resolve per-context signed permutations,
///        intervention targets and gauge scalings so every context's factor
///        matrix becomes the mixing matrix A^(k) in the observational
///        context's column labeling.
///
/// Two routes are provided. The general route searches signed permutations
/// for the one making A^(0) - A^(k)·Q essentially rank one (its second
/// singular value minimal), then reads the target off the column whose
/// scaling ratio is farthest from 1. The injective route (q <= p) works on
/// pseudo-inverses of the factor matrices, where intervention shows up as a
/// single changed row.

#include "lcd/common.hpp"
#include "lcd/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcd {

// ---------------------------------------------------------------------------
// General route: signed-permutation search
// ---------------------------------------------------------------------------

struct PermSearchOptions {
    /// Slack added to the incumbent when pruning; every candidate within
    /// slack of the final optimum is guaranteed to be fully evaluated.
    double prune_slack = 1e-9;
    /// Two optima closer than this (and not sign twins) mean degenerate input.
    double tie_window = 1e-10;
    /// Full enumeration instead of branch-and-bound (exact runner-up margins).
    bool exhaustive = false;
    int cap = 8;
};

struct PermSearchResult {
    Matrix Q;                    // signed permutation, Mk * Q ≈ M0
    std::vector<int> perm;       // perm[j] = source column of Mk at position j
    std::vector<double> sign;    // sign applied to that column
    double sigma2 = 0.0;         // second singular value at the optimum
    double sigma1 = 0.0;         // largest singular value at the optimum
    /// Best sigma2 among candidates that are not sign twins of the optimum;
    /// NaN when branch-and-bound pruned everything beyond the slack.
    double runner_up_sigma2 = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct PermCandidate {
    std::vector<int> perm;
    std::vector<double> sign;
    double sigma2, sigma1;
};

/// Top two singular values of the difference matrix. Computed by SVD, not
/// from the Gram matrix: squaring would halve the accuracy and lift sigma2
/// of an exactly rank-one difference to sqrt(eps) times sigma1, which is
/// far above the tie window the candidate comparison relies on.
inline void top_two_singulars(const Matrix& diff, double& s1, double& s2) {
    Eigen::JacobiSVD<Matrix> svd(diff);
    const auto& sv = svd.singularValues();
    s1 = sv.size() >= 1 ? sv[0] : 0.0;
    s2 = sv.size() >= 2 ? sv[1] : 0.0;
}

/// True when b differs from a by flipping the sign of exactly one column of
/// the same permutation (the unavoidable twin of a rank-one optimum: for a
/// perfect intervention the target column of A^(k) equals that of A^(0), so
/// both signs of it close the search at the same sigma2).
inline bool single_sign_flip(const PermCandidate& a, const PermCandidate& b) {
    if (a.perm != b.perm) return false;
    int flips = 0;
    for (std::size_t j = 0; j < a.sign.size(); ++j)
        if (a.sign[j] != b.sign[j]) ++flips;
    return flips == 1;
}

} // namespace detail

/// argmin over signed permutations Q' of sigma2(M0 - Mk·Q'), lexicographically
/// tie-broken by sigma1 (which selects positive target scalings among the
/// sign-twin pair). Branch-and-bound over column assignments: appending a
/// difference column can only raise each singular value (interlacing), so a
/// partial assignment whose sigma2 already exceeds the incumbent plus slack
/// cannot contain the optimum or anything within the slack window.
inline PermSearchResult recover_perm_general(const Matrix& M0, const Matrix& Mk,
                                             const PermSearchOptions& opts = {}) {
    const int p = static_cast<int>(M0.rows());
    const int q = static_cast<int>(M0.cols());
    if (Mk.rows() != p || Mk.cols() != q)
        throw std::invalid_argument("recover_perm_general: shape mismatch");
    if (q > opts.cap) throw std::invalid_argument("recover_perm_general: q over search cap");

    std::vector<detail::PermCandidate> leaves;
    double best_sigma2 = std::numeric_limits<double>::infinity();
    double runner_floor = std::numeric_limits<double>::infinity(); // exhaustive only
    auto keep = [&](detail::PermCandidate&& c) {
        // Retain only the window around the incumbent; remember the smallest
        // discarded sigma2 so exhaustive mode can still report the runner-up.
        if (c.sigma2 <= best_sigma2 + opts.prune_slack) {
            best_sigma2 = std::min(best_sigma2, c.sigma2);
            leaves.push_back(std::move(c));
            if (leaves.size() > 4096) {
                std::vector<detail::PermCandidate> kept;
                for (auto& l : leaves)
                    if (l.sigma2 <= best_sigma2 + opts.prune_slack)
                        kept.push_back(std::move(l));
                    else
                        runner_floor = std::min(runner_floor, l.sigma2);
                leaves.swap(kept);
            }
        } else {
            runner_floor = std::min(runner_floor, c.sigma2);
        }
    };

    if (opts.exhaustive) {
        std::vector<int> perm(q);
        for (int i = 0; i < q; ++i) perm[i] = i;
        std::sort(perm.begin(), perm.end());
        do {
            for (std::size_t mask = 0; mask < (std::size_t{1} << q); ++mask) {
                Matrix diff(p, q);
                std::vector<double> sign(q);
                for (int j = 0; j < q; ++j) {
                    sign[j] = (mask >> j) & 1 ? -1.0 : 1.0;
                    diff.col(j) = M0.col(j) - sign[j] * Mk.col(perm[j]);
                }
                double s1, s2;
                detail::top_two_singulars(diff, s1, s2);
                keep({perm, sign, s2, s1});
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        // DFS state: position j gets (column, sign); children ordered by the
        // partial sigma2 and, within ties, by how collinear the new column
        // pair is, so the true assignment is reached first and everything
        // else prunes against its near-zero sigma2.
        std::vector<int> perm(q, -1);
        std::vector<double> sign(q, 1.0);
        std::vector<char> used(q, 0);
        struct Child {
            int col;
            double sgn;
            double s2_partial;
            double coll_res;
            Matrix diff;
        };
        auto dfs = [&](auto&& self, int depth, const Matrix& diff) -> void {
            if (depth == q) {
                double s1, s2;
                detail::top_two_singulars(diff, s1, s2);
                keep({perm, sign, s2, s1});
                return;
            }
            std::vector<Child> children;
            for (int c = 0; c < q; ++c) {
                if (used[c]) continue;
                for (double s : {1.0, -1.0}) {
                    Matrix g(p, depth + 1);
                    g.leftCols(depth) = diff;
                    g.col(depth) = M0.col(depth) - s * Mk.col(c);
                    double s1, s2;
                    detail::top_two_singulars(g, s1, s2);
                    if (s2 > best_sigma2 + opts.prune_slack) continue;
                    double m0n = M0.col(depth).norm(), mkn = Mk.col(c).norm();
                    double coll;
                    if (m0n == 0.0 || mkn == 0.0) {
                        coll = 1.0;
                    } else {
                        double r = (s * Mk.col(c)).dot(M0.col(depth)) / (m0n * m0n);
                        coll = (s * Mk.col(c) - r * M0.col(depth)).norm() / mkn;
                    }
                    children.push_back({c, s, s2, coll, std::move(g)});
                }
            }
            std::sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
                if (a.s2_partial != b.s2_partial) return a.s2_partial < b.s2_partial;
                return a.coll_res < b.coll_res;
            });
            for (auto& ch : children) {
                if (ch.s2_partial > best_sigma2 + opts.prune_slack) continue; // bound moved
                perm[depth] = ch.col;
                sign[depth] = ch.sgn;
                used[ch.col] = 1;
                self(self, depth + 1, ch.diff);
                used[ch.col] = 0;
            }
        };
        dfs(dfs, 0, Matrix(p, 0));
    }

    // Keep the window around the optimum, pick the lexicographic best.
    std::vector<detail::PermCandidate> window;
    for (auto& c : leaves)
        if (c.sigma2 <= best_sigma2 + opts.prune_slack) window.push_back(std::move(c));
    std::sort(window.begin(), window.end(),
              [](const detail::PermCandidate& a, const detail::PermCandidate& b) {
                  if (a.sigma2 != b.sigma2) return a.sigma2 < b.sigma2;
                  return a.sigma1 < b.sigma1;
              });
    const detail::PermCandidate* best = nullptr;
    for (const auto& c : window) {
        if (c.sigma2 > best_sigma2 + opts.tie_window) break;
        if (!best || c.sigma1 < best->sigma1) best = &c;
    }
    if (!best) throw NumericalError("recover_perm_general: empty search window");

    PermSearchResult out;
    out.perm = best->perm;
    out.sign = best->sign;
    out.sigma2 = best->sigma2;
    out.sigma1 = best->sigma1;
    out.Q = Matrix::Zero(q, q);
    for (int j = 0; j < q; ++j) out.Q(best->perm[j], j) = best->sign[j];

    for (const auto& c : window) {
        if (&c == best) continue;
        bool s2_tie = c.sigma2 <= best_sigma2 + opts.tie_window;
        if (detail::single_sign_flip(*best, c) && s2_tie) continue;
        // The selection key is (sigma2, sigma1); only a rival tying both
        // components leaves the choice genuinely undetermined.
        if (s2_tie && std::abs(c.sigma1 - best->sigma1) <= opts.tie_window)
            throw NumericalError("recover_perm_general: ambiguous minimum (degenerate input)");
        if (!(out.runner_up_sigma2 == out.runner_up_sigma2) || c.sigma2 < out.runner_up_sigma2)
            out.runner_up_sigma2 = c.sigma2;
    }
    // Exhaustive mode saw every candidate, so the smallest discarded sigma2
    // completes the runner-up; under branch-and-bound anything pruned is only
    // known to lie beyond the slack, so NaN stands for "unknown but distant".
    if (opts.exhaustive && runner_floor < std::numeric_limits<double>::infinity())
        if (!(out.runner_up_sigma2 == out.runner_up_sigma2) ||
            runner_floor < out.runner_up_sigma2)
            out.runner_up_sigma2 = runner_floor;
    return out;
}

// ---------------------------------------------------------------------------
// General route: target and scaling
// ---------------------------------------------------------------------------

struct AlignOptions {
    double collinearity_thr = 1e-6; // per-column residual after alignment
    double gauge_thr = 0.2;         // |log|ratio|| above this marks a target
    PermSearchOptions perm;
};

/// One context aligned against the observational factor matrix, before any
/// target decision: N = Mk·Q plus per-column scaling ratios against M0.
/// Columns touched by the intervention (ancestors of the target) are shifted
/// by a multiple of the target column and so are legitimately non-collinear
/// with their reference; the residual records this per column instead of the
/// alignment rejecting it.
struct ColumnAlignment {
    PermSearchResult perm;
    Matrix N;          // Mk * Q
    Vector ratios;     // per column j: <N_j, M0_j> / <M0_j, M0_j>
    Vector residuals;  // relative residual of N_j against ratio * M0_j

    bool collinear(int j, double thr) const { return residuals[j] <= thr; }
};

inline ColumnAlignment align_columns(const Matrix& M0, const Matrix& Mk,
                                     const AlignOptions& opts = {}) {
    ColumnAlignment out;
    out.perm = recover_perm_general(M0, Mk, opts.perm);
    out.N = Mk * out.perm.Q;
    const int q = static_cast<int>(M0.cols());
    out.ratios.resize(q);
    out.residuals.resize(q);
    for (int j = 0; j < q; ++j) {
        double denom = M0.col(j).squaredNorm();
        if (denom == 0.0)
            throw NumericalError("align_columns: zero reference column");
        double r = out.N.col(j).dot(M0.col(j)) / denom;
        double scale = std::max(out.N.col(j).norm(), 1e-300);
        out.ratios[j] = r;
        out.residuals[j] = (out.N.col(j) - r * M0.col(j)).norm() / scale;
    }
    return out;
}

struct TargetScaling {
    int target = 0;   // node label, 1-based
    Matrix D;         // diagonal, ratio at (target-1, target-1), 1 elsewhere
    ColumnAlignment alignment;
};

namespace detail {

/// |log|ratio|| of column j, or -1 marking the column ineligible as a target
/// because it is not collinear with its reference. The target column is
/// always collinear (only its gauge weight changes), so ineligible columns
/// are the ones shifted by the intervention.
inline double target_deviation(const ColumnAlignment& ca, int j, double collinearity_thr) {
    if (!ca.collinear(j, collinearity_thr)) return -1.0;
    double mag = std::abs(ca.ratios[j]);
    // A vanishing ratio would be infinitely far from 1; keep it finite so the
    // assignment arithmetic stays well defined.
    return mag > 0.0 ? std::abs(std::log(mag)) : 1e30;
}

} // namespace detail

/// Finds the intervention target as the collinear column whose scaling ratio
/// is farthest from 1 (in |log|ratio||) and returns the diagonal gauge
/// matrix. Exactly one column may stand out; none means an unintervened
/// duplicate, several mean the gauge assumptions are violated.
inline TargetScaling recover_target_scaling_general(const Matrix& M0, const Matrix& Mk,
                                                    const AlignOptions& opts = {}) {
    TargetScaling out;
    out.alignment = align_columns(M0, Mk, opts);
    const int q = static_cast<int>(M0.cols());
    int coll_count = 0, far_count = 0;
    int target = -1;
    double best_dev = -1.0;
    for (int j = 0; j < q; ++j) {
        if (out.alignment.collinear(j, opts.collinearity_thr)) ++coll_count;
        double dev = detail::target_deviation(out.alignment, j, opts.collinearity_thr);
        if (dev > opts.gauge_thr) ++far_count;
        if (dev > best_dev) {
            best_dev = dev;
            target = j;
        }
    }
    if (coll_count == 0)
        throw NumericalError("recover_target_scaling_general: no collinear column pair "
                             "(alignment failed)");
    if (far_count == 0)
        throw NumericalError("recover_target_scaling_general: no distinguishable target "
                             "(gauge violation)");
    if (far_count > 1)
        throw NumericalError("recover_target_scaling_general: multiple scaled columns "
                             "(gauge violation)");
    out.target = target + 1;
    out.D = Matrix::Identity(q, q);
    out.D(target, target) = out.alignment.ratios[target];
    return out;
}

// ---------------------------------------------------------------------------
// Aligned output shared by both routes
// ---------------------------------------------------------------------------

/// Mixing matrices of all contexts in the observational column labeling,
/// contexts relabeled so context k targets node k. source[k-1] records which
/// input context became context k.
struct AlignedContexts {
    std::vector<Matrix> A;        // index k = context, A[0] observational
    std::vector<int> targets;     // targets[k-1] = k after relabeling
    std::vector<int> source;      // original input context index
    std::vector<double> scalings; // removed gauge ratio D^(k) at the target
    std::vector<double> sigma2;   // of A^(0) - A^(k) after scaling removal
    std::vector<double> sigma1;

    int q() const { return static_cast<int>(A.front().cols()); }
    int num_contexts() const { return static_cast<int>(A.size()) - 1; }
};

namespace detail {

/// Forces targets to be a bijection onto [q]: feasible pairs must clear the
/// gauge threshold; among bijections the total |log|ratio|| is maximized.
/// deviation(k-1, t-1) is |log|ratio of column t in context k||.
inline std::vector<int> force_distinct_targets(const Matrix& deviation, double gauge_thr) {
    const int n = static_cast<int>(deviation.rows());
    const double big = 1e6;
    Matrix cost(n, n);
    for (int k = 0; k < n; ++k)
        for (int t = 0; t < n; ++t)
            cost(k, t) = deviation(k, t) > gauge_thr ? -deviation(k, t) : big;
    std::vector<int> pick = assignment_min_cost(cost);
    for (int k = 0; k < n; ++k)
        if (cost(k, pick[k]) >= big)
            throw NumericalError("force_distinct_targets: no bijective target assignment "
                                 "clears the gauge threshold");
    return pick;
}

} // namespace detail

/// General-route alignment of a whole factor set. Per context the signed
/// permutation and the scaling are recovered and divided out; targets are
/// made bijective (Hungarian-style reassignment when the per-context winners
/// collide) and contexts are relabeled so context k targets node k.
inline AlignedContexts align_general(const FactorSet& fs, const AlignOptions& opts = {}) {
    if (fs.factors.empty()) throw std::invalid_argument("align_general: empty factor set");
    const Matrix& M0 = fs.factors.front();
    const int q = static_cast<int>(M0.cols());
    const int K = static_cast<int>(fs.factors.size()) - 1;
    if (K != q)
        throw std::invalid_argument("align_general: need one context per latent node");

    std::vector<ColumnAlignment> steps;
    Matrix deviation(K, q); // -1 marks non-collinear columns (ineligible)
    for (int k = 1; k <= K; ++k) {
        steps.push_back(align_columns(M0, fs.factors[k], opts));
        for (int j = 0; j < q; ++j)
            deviation(k - 1, j) = detail::target_deviation(steps.back(), j, opts.collinearity_thr);
    }

    // Naive per-context winners first; fall back to the global assignment.
    std::vector<int> target_of(K);
    bool naive_ok = true;
    std::vector<char> hit(q, 0);
    for (int k = 0; k < K; ++k) {
        int far_count = 0, t = -1;
        double best = -1.0;
        for (int j = 0; j < q; ++j) {
            if (deviation(k, j) > opts.gauge_thr) ++far_count;
            if (deviation(k, j) > best) {
                best = deviation(k, j);
                t = j;
            }
        }
        if (far_count != 1 || hit[t]) {
            naive_ok = false;
            break;
        }
        hit[t] = 1;
        target_of[k] = t;
    }
    if (!naive_ok) target_of = detail::force_distinct_targets(deviation, opts.gauge_thr);

    AlignedContexts ac;
    ac.A.assign(q + 1, Matrix());
    ac.targets.assign(q, 0);
    ac.source.assign(q, 0);
    ac.scalings.assign(q, 0.0);
    ac.sigma2.assign(q, 0.0);
    ac.sigma1.assign(q, 0.0);
    ac.A[0] = M0;
    for (int k = 0; k < K; ++k) {
        int t = target_of[k];
        double ratio = steps[k].ratios[t];
        Matrix A = steps[k].N;
        A.col(t) /= ratio;
        double s1, s2;
        detail::top_two_singulars(M0 - A, s1, s2);
        ac.A[t + 1] = std::move(A);
        ac.targets[t] = t + 1;
        ac.source[t] = k + 1;
        ac.scalings[t] = ratio;
        ac.sigma2[t] = s2;
        ac.sigma1[t] = s1;
    }
    return ac;
}

// ---------------------------------------------------------------------------
// Injective route (q <= p): pseudo-inverse row matching
// ---------------------------------------------------------------------------

/// Pseudo-inverses C^(k) of the factor matrices; rows are indexed by latent
/// nodes in each context's own labeling.
struct PinvContexts {
    std::vector<Matrix> C;
};

inline PinvContexts pinv_contexts(const FactorSet& fs) {
    PinvContexts pc;
    for (const auto& M : fs.factors) {
        if (M.cols() > M.rows())
            throw std::invalid_argument("pinv_contexts: q > p (injective route unavailable)");
        pc.C.push_back(pinv(M));
    }
    return pc;
}

namespace detail {

/// Sign-aware relative row distance matrix between two q x p matrices.
inline Matrix row_distances(const Matrix& C0, const Matrix& Ck) {
    const int q = static_cast<int>(C0.rows());
    Matrix D(q, q);
    for (int l = 0; l < q; ++l)
        for (int m = 0; m < q; ++m) {
            double scale = std::max({C0.row(l).norm(), Ck.row(m).norm(), 1e-300});
            double plus = (C0.row(l) - Ck.row(m)).norm();
            double minus = (C0.row(l) + Ck.row(m)).norm();
            D(l, m) = std::min(plus, minus) / scale;
        }
    return D;
}

inline void check_rows_distinct(const Matrix& C0, double tol, const char* who) {
    const int q = static_cast<int>(C0.rows());
    for (int a = 0; a < q; ++a)
        for (int b = a + 1; b < q; ++b) {
            double scale = std::max({C0.row(a).norm(), C0.row(b).norm(), 1e-300});
            double d = std::min((C0.row(a) - C0.row(b)).norm(),
                                (C0.row(a) + C0.row(b)).norm()) /
                       scale;
            if (d <= tol)
                throw NumericalError(std::string(who) +
                                     ": reference rows not pairwise distinct "
                                     "(genericity violated)");
        }
}

} // namespace detail

/// Intervention detection on pseudo-inverses: the target i_k is the unique
/// row of C0 without a partner in Ck (relative distance <= tol, either sign),
/// j_k the unique unmatched row of Ck. Returns 1-based labels.
inline std::pair<int, int> recover_target_injective(const Matrix& C0, const Matrix& Ck,
                                                    double tol = 1e-6) {
    if (C0.rows() != Ck.rows() || C0.cols() != Ck.cols())
        throw std::invalid_argument("recover_target_injective: shape mismatch");
    detail::check_rows_distinct(C0, tol, "recover_target_injective");
    Matrix D = detail::row_distances(C0, Ck);
    const int q = static_cast<int>(C0.rows());
    std::vector<int> un0, unk;
    for (int l = 0; l < q; ++l)
        if ((D.row(l).array() > tol).all()) un0.push_back(l);
    for (int m = 0; m < q; ++m)
        if ((D.col(m).array() > tol).all()) unk.push_back(m);
    if (un0.size() != 1 || unk.size() != 1)
        throw NumericalError("recover_target_injective: expected exactly one unmatched row, got " +
                             std::to_string(un0.size()) + " / " + std::to_string(unk.size()));
    return {un0[0] + 1, unk[0] + 1};
}

/// Signed row permutation aligning Ck to C0: P(l, m) = ±1 for matched rows
/// (the sign making the rows agree, since tensor factors carry arbitrary
/// column signs), completed by P(i_k, j_k) = 1 at the intervened pair. The
/// intervened row's sign is arbitrary; it cancels against the signed scaling
/// ratio wherever the pair is consumed together.
inline Matrix recover_perm_injective(const Matrix& C0, const Matrix& Ck, double tol = 1e-6) {
    auto [ik, jk] = recover_target_injective(C0, Ck, tol);
    Matrix D = detail::row_distances(C0, Ck);
    const int q = static_cast<int>(C0.rows());
    Matrix P = Matrix::Zero(q, q);
    P(ik - 1, jk - 1) = 1.0;
    for (int l = 0; l < q; ++l) {
        if (l == ik - 1) continue;
        int hits = 0, pick = -1;
        for (int m = 0; m < q; ++m)
            if (D(l, m) <= tol) {
                ++hits;
                pick = m;
            }
        if (hits != 1)
            throw NumericalError("recover_perm_injective: non-bijective row matching");
        P(l, pick) = (C0.row(l) - Ck.row(pick)).norm() <= (C0.row(l) + Ck.row(pick)).norm()
                         ? 1.0
                         : -1.0;
    }
    for (int m = 0; m < q; ++m)
        if (P.col(m).cwiseAbs().sum() != 1.0)
            throw NumericalError("recover_perm_injective: non-bijective row matching");
    return P;
}

/// Gauge scaling at the target: compare column i_k of pinv(C0) with column
/// i_k of pinv(P·Ck) via the coordinate ratio at the largest reference
/// coordinate (they are collinear when target and permutation are right).
inline Matrix recover_scaling_injective(const Matrix& C0, const Matrix& Ck, double tol = 1e-6) {
    auto [ik, jk] = recover_target_injective(C0, Ck, tol);
    (void)jk;
    Matrix P = recover_perm_injective(C0, Ck, tol);
    Matrix B0 = pinv(C0);
    Matrix Bk = pinv(P * Ck);
    Vector u = B0.col(ik - 1), v = Bk.col(ik - 1);
    int lead;
    u.cwiseAbs().maxCoeff(&lead);
    if (u[lead] == 0.0)
        throw NumericalError("recover_scaling_injective: zero reference column");
    double ratio = v[lead] / u[lead];
    double scale = std::max(v.norm(), 1e-300);
    if ((v - ratio * u).norm() / scale > 1e-6)
        throw NumericalError("recover_scaling_injective: target columns not collinear");
    const int q = static_cast<int>(C0.rows());
    Matrix D = Matrix::Identity(q, q);
    D(ik - 1, ik - 1) = ratio;
    return D;
}

/// Alignment output of the injective route: aligned mixing matrices plus the
/// pseudo-inverse data recovery needs (row permutations, intervened source
/// rows, scalings), everything relabeled so context k targets node k.
struct InjectiveAlignment {
    AlignedContexts ac;
    PinvContexts pc;             // relabeled: pc.C[k] belongs to context k
    std::vector<Matrix> P;       // P[k-1]: signed row permutation of context k
    std::vector<int> source_row; // source_row[k-1] = j_k (1-based row of C^(k))
};

/// Full injective alignment. By default targets are found robustly: rows are
/// matched by a minimum-total-distance assignment, each context nominates the
/// matched pair with the largest distance, and collisions are resolved by a
/// global bijective assignment on those distances.
inline InjectiveAlignment align_injective(const FactorSet& fs, double tol = 1e-6,
                                          bool robust = true) {
    PinvContexts pc = pinv_contexts(fs);
    const Matrix& C0 = pc.C.front();
    const int q = static_cast<int>(C0.rows());
    const int K = static_cast<int>(pc.C.size()) - 1;
    if (K != q)
        throw std::invalid_argument("align_injective: need one context per latent node");

    std::vector<Matrix> perms(K);
    std::vector<int> target_of(K), source_of(K);
    if (!robust) {
        for (int k = 0; k < K; ++k) {
            auto [ik, jk] = recover_target_injective(C0, pc.C[k + 1], tol);
            target_of[k] = ik - 1;
            source_of[k] = jk - 1;
            perms[k] = recover_perm_injective(C0, pc.C[k + 1], tol);
        }
        std::vector<char> hit(q, 0);
        for (int k = 0; k < K; ++k) {
            if (hit[target_of[k]])
                throw NumericalError("align_injective: duplicate targets");
            hit[target_of[k]] = 1;
        }
    } else {
        // Assignment-based matching; the intervened pair is the worst match.
        Matrix strength(K, q); // distance of row t's matched pair in context k
        std::vector<std::vector<int>> match(K);
        for (int k = 0; k < K; ++k) {
            Matrix D = detail::row_distances(C0, pc.C[k + 1]);
            match[k] = assignment_min_cost(D);
            for (int t = 0; t < q; ++t) strength(k, t) = D(t, match[k][t]);
        }
        std::vector<int> pick(K);
        bool collision = false;
        std::vector<char> hit(q, 0);
        for (int k = 0; k < K; ++k) {
            int t;
            strength.row(k).maxCoeff(&t);
            pick[k] = t;
            if (hit[t]) collision = true;
            hit[t] = 1;
        }
        if (collision) pick = assignment_min_cost(Matrix(-strength));
        for (int k = 0; k < K; ++k) {
            target_of[k] = pick[k];
            source_of[k] = match[k][pick[k]];
            Matrix P = Matrix::Zero(q, q);
            for (int l = 0; l < q; ++l) {
                int m = match[k][l];
                const auto& r0 = C0.row(l);
                const auto& rk = pc.C[k + 1].row(m);
                P(l, m) = (r0 - rk).norm() <= (r0 + rk).norm() ? 1.0 : -1.0;
            }
            perms[k] = std::move(P);
        }
    }

    InjectiveAlignment out;
    out.ac.A.assign(q + 1, Matrix());
    out.ac.targets.assign(q, 0);
    out.ac.source.assign(q, 0);
    out.ac.scalings.assign(q, 0.0);
    out.ac.sigma2.assign(q, 0.0);
    out.ac.sigma1.assign(q, 0.0);
    out.pc.C.assign(q + 1, Matrix());
    out.P.assign(q, Matrix());
    out.source_row.assign(q, 0);
    out.ac.A[0] = fs.factors.front();
    out.pc.C[0] = C0;

    for (int k = 0; k < K; ++k) {
        int t = target_of[k];
        Matrix Bk = pinv(perms[k] * pc.C[k + 1]);
        Vector u = out.ac.A[0].col(t), v = Bk.col(t);
        int lead;
        u.cwiseAbs().maxCoeff(&lead);
        if (u[lead] == 0.0) throw NumericalError("align_injective: zero reference column");
        double ratio = v[lead] / u[lead];
        Matrix A = Bk;
        A.col(t) /= ratio;
        double s1, s2;
        detail::top_two_singulars(out.ac.A[0] - A, s1, s2);
        out.ac.A[t + 1] = std::move(A);
        out.ac.targets[t] = t + 1;
        out.ac.source[t] = k + 1;
        out.ac.scalings[t] = ratio;
        out.ac.sigma2[t] = s2;
        out.ac.sigma1[t] = s1;
        out.pc.C[t + 1] = pc.C[k + 1];
        out.P[t] = perms[k];
        out.source_row[t] = source_of[k] + 1;
    }
    return out;
}

} // namespace lcd
