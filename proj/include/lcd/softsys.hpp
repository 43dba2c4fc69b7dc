#pragma once

/// @file softsys.hpp
/// @brief Solution-space analysis under soft interventions.
///
/// A soft intervention rescales the incoming edge weights of its target, so
/// the parameters are no longer pinned down uniquely. What remains is an
/// affine solution space, described per node j by a linear system in the
/// baseline weights lambda(i, j), i in ch(j). The system's coefficients are
/// ratios of cross-context column differences of the mixing matrices, and
/// its rank profile also decides which candidate DAGs are compatible with
/// the observed contexts at all.

#include "lcd/align.hpp"
#include "lcd/graph.hpp"
#include "lcd/model.hpp"

#include <algorithm>
#include <vector>

namespace lcd {

/// Normalized difference row of context k against the baseline. Entry i-1
/// holds (A^(k)(l,i) - A^(0)(l,i)) / A^(0)(l,t) with t the intervention
/// target and l the row maximizing |A^(0)(l,t)|. Rank-one structure of
/// A^(k) - A^(0) makes the choice of l immaterial in exact arithmetic; the
/// max-magnitude anchor is for conditioning.
inline Eigen::RowVectorXd delta_row(const Matrix& A0, const Matrix& Ak, int target) {
    const int q = static_cast<int>(A0.cols());
    if (target < 1 || target > q) throw std::invalid_argument("delta_row: target out of range");
    if (Ak.rows() != A0.rows() || Ak.cols() != A0.cols())
        throw std::invalid_argument("delta_row: shape mismatch");
    int l;
    A0.col(target - 1).cwiseAbs().maxCoeff(&l);
    double denom = A0(l, target - 1);
    if (denom == 0.0) throw NumericalError("delta_row: zero anchor column");
    return (Ak.row(l) - A0.row(l)) / denom;
}

/// Linear system attached to one node of a candidate DAG.
///
/// Unknowns are the baseline weights on edges into j from its children
/// list... more precisely the weights lambda(i, j) for i in ch(j), column
/// order ascending in i. One equation per context whose target is a
/// descendant but not a child of j, row order following the context order.
struct NodeSystem {
    int node = 0;                    // j, 1-based
    std::vector<int> children;       // ascending, 1-based
    std::vector<int> row_contexts;   // contributing context indices, 0-based
    Matrix M;                        // |rows| x |children|
    Vector b;
    int rank_M = 0;
    int rank_Mb = 0;
    int c = 0;                       // freedom at j, -1 when inconsistent
};

struct SoftSystem {
    std::vector<NodeSystem> nodes;   // index j-1
    int dimension = 0;               // sum of per-node freedoms, -1 when any is -1
};

/// Assembles the per-node systems for candidate DAG g from difference rows
/// deltas[k] of contexts with targets[k]. Contexts may repeat a target; each
/// contributes its own equation.
inline SoftSystem build_soft_system(const Dag& g, const std::vector<Eigen::RowVectorXd>& deltas,
                                    const std::vector<int>& targets, double rank_tol = 1e-8) {
    if (deltas.size() != targets.size())
        throw std::invalid_argument("build_soft_system: one target per delta row required");
    const int q = g.q();
    SoftSystem sys;
    sys.nodes.resize(q);
    bool inconsistent = false;
    for (int j = 1; j <= q; ++j) {
        NodeSystem& ns = sys.nodes[j - 1];
        ns.node = j;
        NodeRelations rel = relations(g, j);
        ns.children.assign(rel.children.begin(), rel.children.end());
        for (std::size_t k = 0; k < targets.size(); ++k) {
            int t = targets[k];
            if (rel.descendants.count(t) && !rel.children.count(t))
                ns.row_contexts.push_back(static_cast<int>(k));
        }
        const int rows = static_cast<int>(ns.row_contexts.size());
        const int cols = static_cast<int>(ns.children.size());
        ns.M.resize(rows, cols);
        ns.b.resize(rows);
        for (int r = 0; r < rows; ++r) {
            const Eigen::RowVectorXd& d = deltas[ns.row_contexts[r]];
            for (int c = 0; c < cols; ++c) ns.M(r, c) = d(ns.children[c] - 1);
            ns.b(r) = d(j - 1);
        }
        if (rows == 0) {
            ns.rank_M = 0;
            ns.rank_Mb = 0;
        } else {
            Matrix Mb(rows, cols + 1);
            Mb.leftCols(cols) = ns.M;
            Mb.col(cols) = ns.b;
            ns.rank_M = numerical_rank(ns.M, rank_tol);
            ns.rank_Mb = numerical_rank(Mb, rank_tol);
        }
        if (ns.rank_M != ns.rank_Mb) {
            ns.c = -1;
            inconsistent = true;
        } else {
            ns.c = cols - ns.rank_M;
        }
    }
    if (inconsistent) {
        sys.dimension = -1;
    } else {
        sys.dimension = 0;
        for (const NodeSystem& ns : sys.nodes) sys.dimension += ns.c;
    }
    return sys;
}

inline int solution_dimension(const Dag& g, const std::vector<Eigen::RowVectorXd>& deltas,
                              const std::vector<int>& targets, double rank_tol = 1e-8) {
    return build_soft_system(g, deltas, targets, rank_tol).dimension;
}

/// Largest per-node equation residual of a candidate baseline Lambda, scaled
/// by 1 + |rhs|. Zero (up to numerics) iff the candidate lies in the
/// solution space.
inline double soft_membership_residual(const SoftSystem& sys, const Matrix& lambda0) {
    double worst = 0.0;
    for (const NodeSystem& ns : sys.nodes) {
        if (ns.M.rows() == 0) continue;
        Vector v(ns.children.size());
        for (std::size_t c = 0; c < ns.children.size(); ++c)
            v(c) = lambda0(ns.children[c] - 1, ns.node - 1);
        double res = (ns.M * v - ns.b).norm() / (1.0 + ns.b.norm());
        worst = std::max(worst, res);
    }
    return worst;
}

/// One free direction of the solution space: a baseline perturbation, the
/// induced mixing-map perturbation, and the induced perturbation of each
/// context's intervened row.
struct SoftDirection {
    Matrix dLambda0;
    Matrix dF;
    std::vector<Matrix> dLambdaK;    // per context
};

/// A point of the solution space plus a basis of its directions.
struct SoftSolution {
    SoftSystem system;
    Matrix lambda0;                  // least-norm representative
    Matrix F;
    std::vector<Matrix> lambdaK;     // per context
    std::vector<SoftDirection> basis;
    int dimension = 0;
};

namespace detail {

/// Intervened row of a context under baseline lambda0. Entry j of the row is
/// lambda0(t-1, j) - sum_{i in ch(j), i != t} d(i-1) lambda0(i-1, j) + d(j-1)
/// for parents j of t, zero elsewhere; with the homogeneous flag set the
/// last summand is dropped (directions instead of points).
inline Eigen::RowVectorXd context_target_row(const Dag& g, const Eigen::RowVectorXd& d, int t,
                                             const Matrix& lambda0, bool homogeneous) {
    const int q = g.q();
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(q);
    NodeRelations trel = relations(g, t);
    for (int j : trel.parents) {
        double val = lambda0(t - 1, j - 1);
        for (int i : relations(g, j).children)
            if (i != t) val -= d(i - 1) * lambda0(i - 1, j - 1);
        if (!homogeneous) val += d(j - 1);
        row(j - 1) = val;
    }
    return row;
}

} // namespace detail

/// Solves the per-node systems for candidate DAG g over the aligned
/// contexts: least-norm baseline weights, kernel bases lifted to full
/// parameter directions, and every context's edge-weight matrix. Throws when
/// some node system is inconsistent (g not compatible with the contexts).
inline SoftSolution solve_soft_parameters(const AlignedContexts& ac, const Dag& g,
                                          double rank_tol = 1e-8) {
    const int q = g.q();
    if (ac.q() != q) throw std::invalid_argument("solve_soft_parameters: node count mismatch");
    const int K = ac.num_contexts();
    std::vector<Eigen::RowVectorXd> deltas;
    std::vector<int> targets;
    for (int k = 1; k <= K; ++k) {
        targets.push_back(ac.targets[k - 1]);
        deltas.push_back(delta_row(ac.A[0], ac.A[k], ac.targets[k - 1]));
    }
    SoftSolution sol;
    sol.system = build_soft_system(g, deltas, targets, rank_tol);
    if (sol.system.dimension < 0)
        throw NumericalError("solve_soft_parameters: inconsistent node system (DAG not compatible)");
    sol.dimension = sol.system.dimension;

    sol.lambda0 = Matrix::Zero(q, q);
    std::vector<Matrix> kernels(q);
    for (const NodeSystem& ns : sol.system.nodes) {
        const int cols = static_cast<int>(ns.children.size());
        if (cols == 0) continue;
        Vector v;
        Matrix ker;
        if (ns.M.rows() == 0 || ns.M.norm() == 0.0) {
            v = Vector::Zero(cols);
            ker = Matrix::Identity(cols, cols);
            if (ns.M.rows() > 0 && ns.b.norm() > 0.0)
                throw NumericalError("solve_soft_parameters: zero system with nonzero rhs");
        } else {
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(ns.M);
            v = cod.solve(ns.b);
            Eigen::FullPivLU<Matrix> lu(ns.M);
            lu.setThreshold(rank_tol);
            ker = lu.kernel();
            if (lu.dimensionOfKernel() == 0) ker.resize(cols, 0);
        }
        for (int c = 0; c < cols; ++c) sol.lambda0(ns.children[c] - 1, ns.node - 1) = v(c);
        kernels[ns.node - 1] = ker;
    }

    Matrix I = Matrix::Identity(q, q);
    sol.F = ac.A[0] * (I - sol.lambda0);
    for (int k = 1; k <= K; ++k) {
        Matrix Lk = sol.lambda0;
        int t = targets[k - 1];
        Lk.row(t - 1) = detail::context_target_row(g, deltas[k - 1], t, sol.lambda0, false);
        sol.lambdaK.push_back(std::move(Lk));
    }

    for (int j = 1; j <= q; ++j) {
        const Matrix& ker = kernels[j - 1];
        for (int dir = 0; dir < ker.cols(); ++dir) {
            SoftDirection sd;
            sd.dLambda0 = Matrix::Zero(q, q);
            const NodeSystem& ns = sol.system.nodes[j - 1];
            for (std::size_t c = 0; c < ns.children.size(); ++c)
                sd.dLambda0(ns.children[c] - 1, j - 1) = ker(c, dir);
            sd.dF = -ac.A[0] * sd.dLambda0;
            for (int k = 1; k <= K; ++k) {
                Matrix dLk = sd.dLambda0;
                int t = targets[k - 1];
                dLk.row(t - 1) =
                    detail::context_target_row(g, deltas[k - 1], t, sd.dLambda0, true);
                sd.dLambdaK.push_back(std::move(dLk));
            }
            sol.basis.push_back(std::move(sd));
        }
    }
    return sol;
}

/// Worst relative mismatch between the aligned mixing matrices and the ones
/// rebuilt from a solution.
inline double soft_reproduction_error(const AlignedContexts& ac, const SoftSolution& sol) {
    const int q = ac.q();
    Matrix I = Matrix::Identity(q, q);
    auto rebuild = [&](const Matrix& L) {
        Eigen::PartialPivLU<Matrix> lu((I - L).transpose());
        return Matrix(lu.solve(sol.F.transpose()).transpose());
    };
    double worst = relative_frobenius(ac.A[0], rebuild(sol.lambda0));
    for (int k = 1; k <= ac.num_contexts(); ++k)
        worst = std::max(worst, relative_frobenius(ac.A[k], rebuild(sol.lambdaK[k - 1])));
    return worst;
}

// ---------------------------------------------------------------------------
// Compatible-DAG classes
// ---------------------------------------------------------------------------

/// Rank pair deciding whether candidate g2 can explain contexts generated
/// under another DAG, evaluated at node j of g2. Row t-1 of D must be the
/// difference row of a generic soft context targeting t (see
/// random_context_deltas). Rows are the non-child descendants of j in g2;
/// the first rank uses the child columns, the second additionally column j.
struct NodeRankPair {
    int node = 0;
    int rank_children = 0;
    int rank_with_self = 0;
    int rows = 0;
    int cols = 0;
};

inline NodeRankPair closure_rank_pair(const Matrix& D, const Dag& g2, int j,
                                      double rank_tol = 1e-8) {
    NodeRelations rel = relations(g2, j);
    std::vector<int> rows, cols;
    for (int t : rel.descendants)
        if (!rel.children.count(t)) rows.push_back(t);
    cols.assign(rel.children.begin(), rel.children.end());
    std::vector<int> cols_self = cols;
    cols_self.push_back(j);
    std::sort(cols_self.begin(), cols_self.end());
    auto sub = [&](const std::vector<int>& rr, const std::vector<int>& cc) {
        Matrix S(rr.size(), cc.size());
        for (std::size_t r = 0; r < rr.size(); ++r)
            for (std::size_t c = 0; c < cc.size(); ++c) S(r, c) = D(rr[r] - 1, cc[c] - 1);
        return S;
    };
    NodeRankPair out;
    out.node = j;
    out.rows = static_cast<int>(rows.size());
    out.cols = static_cast<int>(cols.size());
    out.rank_children = numerical_rank(sub(rows, cols), rank_tol);
    out.rank_with_self = numerical_rank(sub(rows, cols_self), rank_tol);
    return out;
}

/// Path-sum matrix of a random generic filling of g's support, entries
/// uniform in +-[0.25, 1].
inline Matrix random_closure_matrix(const Dag& g, Rng& rng) {
    const int q = g.q();
    Matrix L = Matrix::Zero(q, q);
    for (const auto& [j, i] : g.edges()) L(i - 1, j - 1) = rng.uniform_signed(0.25, 1.0);
    return Matrix((Matrix::Identity(q, q) - L).inverse());
}

/// Difference rows of one generic soft context per node of g. A soft context
/// on t rewrites row t of Lambda with fresh weights, so its difference row
/// is a fresh random combination of the path-matrix rows of t's parents, not
/// the structural combination the path matrix itself carries (the zero row
/// for parentless t reflects that such a context changes nothing). Row t-1
/// of the result is the row for the context targeting t.
inline Matrix random_context_deltas(const Dag& g, Rng& rng) {
    const int q = g.q();
    Matrix W = random_closure_matrix(g, rng);
    Matrix D = Matrix::Zero(q, q);
    for (int t = 1; t <= q; ++t)
        for (int p : g.parents(t)) D.row(t - 1) += rng.uniform_signed(0.25, 1.0) * W.row(p - 1);
    return D;
}

/// All DAGs able to explain contexts generated under g with one soft
/// intervention per node: same transitive closure plus, at every node, the
/// rank pair agreeing. Generic behavior is decided by majority over a few
/// random context draws. Output sorted; g itself is always a member.
inline std::vector<Dag> soft_compatible_class(const Dag& g, Rng& rng, int draws = 3,
                                              int extra_cap = 6, double rank_tol = 1e-8) {
    std::vector<Dag> candidates = same_closure_dags(g, extra_cap);
    std::vector<Matrix> Ds;
    for (int t = 0; t < draws; ++t) Ds.push_back(random_context_deltas(g, rng));
    std::vector<Dag> out;
    for (const Dag& cand : candidates) {
        int votes = 0;
        for (const Matrix& D : Ds) {
            bool ok = true;
            for (int j = 1; j <= g.q() && ok; ++j) {
                NodeRankPair pr = closure_rank_pair(D, cand, j, rank_tol);
                ok = pr.rank_children == pr.rank_with_self;
            }
            if (ok) ++votes;
        }
        if (2 * votes > draws) out.push_back(cand);
    }
    return out;
}

} // namespace lcd
