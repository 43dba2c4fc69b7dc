#pragma once

/// @file cumulant.hpp
/// @brief Packed symmetric tensors and cumulant estimation from data
///        (orders 2 to 4), plus the multilinear utilities built on them.

#include "lcd/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lcd {

/// Order-d symmetric tensor over R^p in packed storage: one value per
/// multiset of size d over {0..p-1}, laid out in lexicographic order of the
/// sorted index tuple. Reads through any index permutation hit the same slot
/// (a dense full-index lookup table is built once per tensor shape).
class SymmetricTensor {
public:
    SymmetricTensor(int d, int p) : d_(d), p_(p) {
        if (d < 1 || p < 1) throw std::invalid_argument("SymmetricTensor: bad shape");
        vals_.assign(binomial(p + d - 1, d), 0.0);
        build_lut();
    }

    int order() const { return d_; }
    int dim() const { return p_; }
    std::size_t packed_size() const { return vals_.size(); }
    const std::vector<double>& packed() const { return vals_; }
    std::vector<double>& packed() { return vals_; }

    template <typename... Is>
    double at(Is... idx) const {
        return vals_[slot(idx...)];
    }
    template <typename... Is>
    double& at(Is... idx) {
        return vals_[slot(idx...)];
    }

    /// Packed slot of an arbitrary (not necessarily sorted) index tuple.
    template <typename... Is>
    std::size_t slot(Is... idx) const {
        static_assert(sizeof...(Is) > 0);
        if (sizeof...(Is) != static_cast<std::size_t>(d_))
            throw std::invalid_argument("SymmetricTensor: index arity mismatch");
        std::array<int, sizeof...(Is)> a{static_cast<int>(idx)...};
        std::size_t flat = 0;
        for (int v : a) {
            if (v < 0 || v >= p_) throw std::invalid_argument("SymmetricTensor: index out of range");
            flat = flat * p_ + v;
        }
        return lut_[flat];
    }

    std::size_t slot_of(const std::vector<int>& tuple) const {
        if (tuple.size() != static_cast<std::size_t>(d_))
            throw std::invalid_argument("SymmetricTensor: index arity mismatch");
        std::size_t flat = 0;
        for (int v : tuple) {
            if (v < 0 || v >= p_) throw std::invalid_argument("SymmetricTensor: index out of range");
            flat = flat * p_ + v;
        }
        return lut_[flat];
    }

    /// Visits sorted index tuples in packed (lexicographic) order.
    static void for_each_sorted(int d, int p, const std::function<void(const std::vector<int>&)>& fn) {
        std::vector<int> t(d, 0);
        while (true) {
            fn(t);
            int k = d - 1;
            while (k >= 0 && t[k] == p - 1) --k;
            if (k < 0) break;
            int v = t[k] + 1;
            for (int m = k; m < d; ++m) t[m] = v;
        }
    }

    /// Number of distinct permutations of a sorted tuple (its multiplicity in
    /// the full tensor); needed for Frobenius norms over packed storage.
    static double multiplicity(const std::vector<int>& sorted_tuple) {
        double total = 1.0, run = 1.0;
        int count = 1;
        for (std::size_t m = 1; m < sorted_tuple.size(); ++m) {
            total *= static_cast<double>(m + 1);
            if (sorted_tuple[m] == sorted_tuple[m - 1]) {
                ++count;
                run *= count;
            } else {
                total /= run;
                run = 1.0;
                count = 1;
            }
        }
        return total / run;
    }

private:
    void build_lut() {
        std::size_t full = 1;
        for (int m = 0; m < d_; ++m) full *= static_cast<std::size_t>(p_);
        lut_.assign(full, 0);
        // Rank sorted tuples in enumeration order, then spread each rank over
        // all permutations of the tuple via a flat-index walk.
        std::size_t rank = 0;
        for_each_sorted(d_, p_, [&](const std::vector<int>& t) {
            std::vector<int> perm = t;
            // iterate permutations of the sorted tuple
            do {
                std::size_t flat = 0;
                for (int v : perm) flat = flat * p_ + v;
                lut_[flat] = rank;
            } while (std::next_permutation(perm.begin(), perm.end()));
            ++rank;
        });
    }

    int d_, p_;
    std::vector<double> vals_;
    std::vector<std::size_t> lut_;
};

/// Frobenius norm counting every full-tensor entry (packed values weighted by
/// their permutation multiplicities).
inline double tensor_norm(const SymmetricTensor& t) {
    double s = 0.0;
    std::size_t idx = 0;
    const auto& v = t.packed();
    SymmetricTensor::for_each_sorted(t.order(), t.dim(), [&](const std::vector<int>& tup) {
        s += SymmetricTensor::multiplicity(tup) * v[idx] * v[idx];
        ++idx;
    });
    return std::sqrt(s);
}

inline double tensor_distance(const SymmetricTensor& a, const SymmetricTensor& b) {
    if (a.order() != b.order() || a.dim() != b.dim())
        throw std::invalid_argument("tensor_distance: shape mismatch");
    double s = 0.0;
    std::size_t idx = 0;
    const auto &va = a.packed(), &vb = b.packed();
    SymmetricTensor::for_each_sorted(a.order(), a.dim(), [&](const std::vector<int>& tup) {
        double d = va[idx] - vb[idx];
        s += SymmetricTensor::multiplicity(tup) * d * d;
        ++idx;
    });
    return std::sqrt(s);
}

/// Σ_i w_i · (column i of B)^{⊗d} as a packed tensor.
inline SymmetricTensor rank_one_sum(int d, const Matrix& B, const Vector& w) {
    if (B.cols() != w.size()) throw std::invalid_argument("rank_one_sum: size mismatch");
    SymmetricTensor t(d, static_cast<int>(B.rows()));
    std::size_t idx = 0;
    auto& v = t.packed();
    SymmetricTensor::for_each_sorted(d, t.dim(), [&](const std::vector<int>& tup) {
        double s = 0.0;
        for (int i = 0; i < B.cols(); ++i) {
            double prod = w[i];
            for (int m : tup) prod *= B(m, i);
            s += prod;
        }
        v[idx++] = s;
    });
    return t;
}

/// Sample cumulant of data rows (observations in rows, coordinates in
/// columns). Columns are mean-centered first; moment estimators use the
/// biased 1/n normalization.
///   d=2: covariance. d=3: third central moment. d=4: fourth central moment
///   minus the three covariance pairings.
inline SymmetricTensor sample_cumulant(const Matrix& data, int d) {
    const auto n = data.rows();
    const int p = static_cast<int>(data.cols());
    if (d < 2 || d > 4) throw std::invalid_argument("sample_cumulant: order must be 2, 3 or 4");
    if (n <= d) throw std::invalid_argument("sample_cumulant: too few samples");
    if (!data.allFinite()) throw std::invalid_argument("sample_cumulant: non-finite entries");

    Eigen::RowVectorXd mean = data.colwise().mean();
    SymmetricTensor t(d, p);
    auto& v = t.packed();
    std::vector<double> x(p);
    // second central moments, needed directly for d=2 and for the d=4 pairings
    Matrix m2 = Matrix::Zero(p, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (int a = 0; a < p; ++a) x[a] = data(r, a) - mean[a];
        std::size_t idx = 0;
        if (d == 2) {
            for (int a = 0; a < p; ++a)
                for (int b = a; b < p; ++b) v[idx++] += x[a] * x[b];
        } else if (d == 3) {
            for (int a = 0; a < p; ++a) {
                double xa = x[a];
                for (int b = a; b < p; ++b) {
                    double xab = xa * x[b];
                    for (int c = b; c < p; ++c) v[idx++] += xab * x[c];
                }
            }
        } else {
            for (int a = 0; a < p; ++a) {
                double xa = x[a];
                for (int b = a; b < p; ++b) {
                    double xab = xa * x[b];
                    m2(a, b) += xab;
                    for (int c = b; c < p; ++c) {
                        double xabc = xab * x[c];
                        for (int e = c; e < p; ++e) v[idx++] += xabc * x[e];
                    }
                }
            }
        }
    }
    double inv_n = 1.0 / static_cast<double>(n);
    for (double& val : v) val *= inv_n;
    if (d == 4) {
        m2 *= inv_n;
        for (int a = 0; a < p; ++a)
            for (int b = a; b < p; ++b) m2(b, a) = m2(a, b);
        std::size_t idx = 0;
        SymmetricTensor::for_each_sorted(4, p, [&](const std::vector<int>& u) {
            v[idx++] -= m2(u[0], u[1]) * m2(u[2], u[3]) + m2(u[0], u[2]) * m2(u[1], u[3]) +
                        m2(u[0], u[3]) * m2(u[1], u[2]);
        });
    }
    return t;
}

/// Multilinear change of coordinates: out_{i1..id} = Σ B_{i1 j1}...B_{id jd} t_{j1..jd}.
inline SymmetricTensor multilinear_transform(const SymmetricTensor& t, const Matrix& B) {
    if (B.cols() != t.dim()) throw std::invalid_argument("multilinear_transform: shape mismatch");
    const int d = t.order(), p = t.dim(), m = static_cast<int>(B.rows());
    SymmetricTensor out(d, m);
    std::size_t idx = 0;
    auto& ov = out.packed();
    std::vector<int> in(d, 0);
    SymmetricTensor::for_each_sorted(d, m, [&](const std::vector<int>& otup) {
        double sum = 0.0;
        std::fill(in.begin(), in.end(), 0);
        // odometer over all p^d input tuples
        while (true) {
            double coeff = 1.0;
            for (int mode = 0; mode < d; ++mode) coeff *= B(otup[mode], in[mode]);
            if (coeff != 0.0) sum += coeff * t.packed()[t.slot_of(in)];
            int k = d - 1;
            while (k >= 0 && in[k] == p - 1) in[k--] = 0;
            if (k < 0) break;
            ++in[k];
        }
        ov[idx++] = sum;
    });
    return out;
}

/// Dense flattening into a p^{d1} x p^{d2} matrix; row and column indices are
/// row-major encodings of the first d1 and last d2 tensor modes.
inline Matrix flatten(const SymmetricTensor& t, int d1, int d2) {
    if (d1 < 1 || d2 < 1 || d1 + d2 != t.order())
        throw std::invalid_argument("flatten: invalid split");
    const int p = t.dim();
    auto pow_int = [](int b, int e) {
        std::size_t r = 1;
        while (e--) r *= static_cast<std::size_t>(b);
        return r;
    };
    const std::size_t nr = pow_int(p, d1), nc = pow_int(p, d2);
    Matrix M(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc));
    std::vector<int> tup(t.order());
    for (std::size_t r = 0; r < nr; ++r) {
        std::size_t rr = r;
        for (int m = d1 - 1; m >= 0; --m) {
            tup[m] = static_cast<int>(rr % p);
            rr /= p;
        }
        for (std::size_t c = 0; c < nc; ++c) {
            std::size_t cc = c;
            for (int m = d2 - 1; m >= 0; --m) {
                tup[d1 + m] = static_cast<int>(cc % p);
                cc /= p;
            }
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                t.packed()[t.slot_of(tup)];
        }
    }
    return M;
}

/// Count of singular values above rel_tol times the largest; 0 for the zero
/// matrix.
inline int numerical_rank(const Matrix& M, double rel_tol = 1e-8) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] <= 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * s[0]) ++r;
    return r;
}

} // namespace lcd
