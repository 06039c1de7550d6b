#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sparsekit {

using index_t = std::size_t;

/// Dense column-major matrix of 64-bit floats. Columns are contiguous,
/// which is the access pattern every solver in this library is built around.
struct DenseMatrix {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<double> values;  // column-major, rows*cols entries

    DenseMatrix() = default;
    DenseMatrix(index_t r, index_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(index_t i, index_t j) { return values[j * rows + i]; }
    double operator()(index_t i, index_t j) const { return values[j * rows + i]; }

    double* col(index_t j) { return values.data() + j * rows; }
    const double* col(index_t j) const { return values.data() + j * rows; }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline double dot(const double* a, const double* b, index_t n) {
    double s = 0.0;
    for (index_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2_sq(const double* a, index_t n) { return dot(a, a, n); }

inline double norm2(const double* a, index_t n) { return std::sqrt(norm2_sq(a, n)); }

inline double norm2(const std::vector<double>& a) { return norm2(a.data(), a.size()); }

inline double norm2_sq(const std::vector<double>& a) { return norm2_sq(a.data(), a.size()); }

inline double norm1(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += std::fabs(v);
    return s;
}

inline double norm_inf(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s = std::max(s, std::fabs(v));
    return s;
}

/// y = A x  (A column-major)
inline void matvec(const DenseMatrix& A, const std::vector<double>& x,
                   std::vector<double>& y) {
    y.assign(A.rows, 0.0);
    for (index_t j = 0; j < A.cols; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        const double* cj = A.col(j);
        for (index_t i = 0; i < A.rows; ++i) y[i] += cj[i] * xj;
    }
}

/// y = A^T x
inline void matvec_t(const DenseMatrix& A, const std::vector<double>& x,
                     std::vector<double>& y) {
    y.resize(A.cols);
    for (index_t j = 0; j < A.cols; ++j) y[j] = dot(A.col(j), x.data(), A.rows);
}

/// Dictionary: matrix whose columns (atoms) have l2-norm at most one.
/// The 1e-12 slack absorbs rounding from the projection itself.
struct Dictionary {
    DenseMatrix atoms;  // m x p

    Dictionary() = default;
    explicit Dictionary(DenseMatrix m) : atoms(std::move(m)) {
        for (index_t j = 0; j < atoms.cols; ++j) {
            if (norm2(atoms.col(j), atoms.rows) > 1.0 + 1e-12)
                throw std::invalid_argument("Dictionary: atom " + std::to_string(j) +
                                            " has norm > 1");
        }
    }

    index_t dim() const { return atoms.rows; }
    index_t size() const { return atoms.cols; }
    const double* atom(index_t j) const { return atoms.col(j); }
};

/// Sparse coefficient vector: support indices strictly increasing, no stored zeros.
struct SparseCode {
    index_t dim = 0;
    std::vector<index_t> support;
    std::vector<double> coeffs;

    SparseCode() = default;
    explicit SparseCode(index_t p) : dim(p) {}

    static SparseCode from_dense(const std::vector<double>& v, double zero_tol = 0.0) {
        SparseCode c(v.size());
        for (index_t i = 0; i < v.size(); ++i) {
            if (std::fabs(v[i]) > zero_tol) {
                c.support.push_back(i);
                c.coeffs.push_back(v[i]);
            }
        }
        return c;
    }

    std::vector<double> to_dense() const {
        std::vector<double> v(dim, 0.0);
        for (index_t k = 0; k < support.size(); ++k) v[support[k]] = coeffs[k];
        return v;
    }

    index_t nnz() const { return support.size(); }
};

/// Disjoint groups covering {0,...,p-1}.
struct GroupStructure {
    std::vector<std::vector<index_t>> groups;

    void validate(index_t p) const {
        std::vector<char> seen(p, 0);
        index_t total = 0;
        for (const auto& g : groups) {
            for (index_t i : g) {
                if (i >= p || seen[i])
                    throw std::invalid_argument("GroupStructure: not a partition");
                seen[i] = 1;
                ++total;
            }
        }
        if (total != p)
            throw std::invalid_argument("GroupStructure: groups do not cover all indices");
    }
};

struct PenaltyL0 {};
struct PenaltyL1 {};
struct PenaltyElasticNet {
    double gamma;  // >= 0
};
struct PenaltyLq {
    double q;  // in (0,1)
};
struct PenaltyWeightedL1 {
    std::vector<double> weights;  // all >= 0
};
struct PenaltyGroupL2 {
    GroupStructure groups;
};

using Penalty = std::variant<PenaltyL0, PenaltyL1, PenaltyElasticNet, PenaltyLq,
                             PenaltyWeightedL1, PenaltyGroupL2>;

/// Result of checking the Lasso optimality conditions.
struct KktReport {
    double max_violation_active = 0.0;    // |grad[i] + lambda*sign(a[i])| on support
    double max_violation_inactive = 0.0;  // max(0, |grad[i]| - lambda) off support
    bool passed = false;
};

}  // namespace sparsekit
