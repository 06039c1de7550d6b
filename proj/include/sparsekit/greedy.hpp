#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "sparsekit/core.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

struct MaxNonzeros {
    index_t k;
};
struct ResidualSq {
    double eps;  // >= 0
};
struct BothStop {
    index_t k;
    double eps;
};
using StopRule = std::variant<MaxNonzeros, ResidualSq, BothStop>;

namespace detail {

inline index_t stop_k(const StopRule& s, index_t fallback) {
    if (const auto* m = std::get_if<MaxNonzeros>(&s)) return m->k;
    if (const auto* b = std::get_if<BothStop>(&s)) return b->k;
    return fallback;
}

inline double stop_eps(const StopRule& s) {
    if (const auto* r = std::get_if<ResidualSq>(&s)) return r->eps;
    if (const auto* b = std::get_if<BothStop>(&s)) return b->eps;
    return 0.0;
}

}  // namespace detail

enum class SolveStatus { Converged, ConvergedEarly, IterationCap, DegenerateAtom };

struct GreedyResult {
    SparseCode code;
    SolveStatus status = SolveStatus::Converged;
    double residual_sq = 0.0;
};

/// Precomputed Gram matrix Q = D^T D shared across a batch of signals.
struct GramCache {
    DenseMatrix Q;  // p x p, symmetric

    explicit GramCache(const Dictionary& D) : Q(D.size(), D.size()) {
        const index_t m = D.dim(), p = D.size();
        for (index_t j = 0; j < p; ++j) {
            for (index_t i = 0; i <= j; ++i) {
                const double v = dot(D.atom(i), D.atom(j), m);
                Q(i, j) = v;
                Q(j, i) = v;
            }
        }
    }
};

/// Growable Cholesky factor of D_Gamma^T D_Gamma. Supports appending one atom
/// (Schur complement) and removing one (Givens re-triangularization), which is
/// what OMP and the homotopy path need.
class CholFactor {
  public:
    index_t size() const { return n_; }

    /// g = D_Gamma^T d_new (current active set), diag = d_new^T d_new.
    /// Returns the Schur complement, or nullopt when it is <= tol
    /// (numerically rank-deficient extension; the factor is left unchanged).
    std::optional<double> append(const std::vector<double>& g, double diag,
                                 double tol = 1e-12) {
        std::vector<double> z(g);
        forward_solve(z);  // z = L^{-1} g
        const double s = diag - norm2_sq(z);
        if (s <= tol) return std::nullopt;
        // new row [z^T, sqrt(s)]
        rows_.push_back(z);
        rows_.back().push_back(std::sqrt(s));
        ++n_;
        return s;
    }

    /// Solve L y = b in place.
    void forward_solve(std::vector<double>& b) const {
        for (index_t i = 0; i < n_; ++i) {
            double s = b[i];
            for (index_t j = 0; j < i; ++j) s -= rows_[i][j] * b[j];
            b[i] = s / rows_[i][i];
        }
    }

    /// Solve L^T y = b in place.
    void backward_solve(std::vector<double>& b) const {
        for (index_t ii = n_; ii-- > 0;) {
            double s = b[ii];
            for (index_t j = ii + 1; j < n_; ++j) s -= rows_[j][ii] * b[j];
            b[ii] = s / rows_[ii][ii];
        }
    }

    /// Solve (L L^T) y = b in place.
    void solve(std::vector<double>& b) const {
        forward_solve(b);
        backward_solve(b);
    }

    /// Remove the atom at position k of the active ordering. The remaining
    /// rows are re-triangularized with Givens rotations.
    void remove(index_t k) {
        rows_.erase(rows_.begin() + static_cast<std::ptrdiff_t>(k));
        --n_;
        // rows at positions >= k keep their old columns and now carry one
        // entry past the diagonal; chase it off with Givens column rotations
        for (index_t i = k; i < n_; ++i) {
            auto& r = rows_[i];
            const double a = r[i], b = r[i + 1];
            const double rr = std::hypot(a, b);
            double c = 1.0, s = 0.0;
            if (rr != 0.0) {
                c = a / rr;
                s = b / rr;
            }
            r[i] = rr;
            r.pop_back();
            for (index_t l = i + 1; l < n_; ++l) {
                auto& rl = rows_[l];
                const double x = rl[i], y = rl[i + 1];
                rl[i] = c * x + s * y;
                rl[i + 1] = -s * x + c * y;
            }
        }
    }

  private:
    index_t n_ = 0;
    std::vector<std::vector<double>> rows_;  // row i has i+1 entries
};

/// Largest eigenvalue of D^T D by power iteration (100 iterations max,
/// relative tolerance 1e-6).
inline double gram_spectral_norm(const Dictionary& D) {
    const index_t m = D.dim(), p = D.size();
    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
    std::vector<double> Dv(m), w(p);
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        matvec(D.atoms, v, Dv);
        matvec_t(D.atoms, Dv, w);
        const double nrm = norm2(w);
        if (nrm == 0.0) return 0.0;
        for (index_t j = 0; j < p; ++j) v[j] = w[j] / nrm;
        if (std::fabs(nrm - lambda) <= 1e-6 * nrm) return nrm;
        lambda = nrm;
    }
    return lambda;
}

/// Matching pursuit. Atoms must have unit norm (deviation > 1e-8 rejected).
inline GreedyResult mp(const std::vector<double>& x, const Dictionary& D,
                       const StopRule& stop) {
    const index_t m = D.dim(), p = D.size();
    if (x.size() != m) throw std::invalid_argument("mp: dimension mismatch");
    for (index_t j = 0; j < p; ++j) {
        if (std::fabs(norm2(D.atom(j), m) - 1.0) > 1e-8)
            throw std::invalid_argument("mp: atom " + std::to_string(j) +
                                        " does not have unit norm");
    }
    const index_t k = detail::stop_k(stop, p);
    const double eps = detail::stop_eps(stop);
    const index_t iter_cap = 10 * p;

    std::vector<double> alpha(p, 0.0), r(x);
    double rsq = norm2_sq(r);
    GreedyResult out;
    out.status = SolveStatus::Converged;
    index_t nnz = 0;
    for (index_t t = 0; t < iter_cap; ++t) {
        nnz = 0;
        for (double a : alpha)
            if (a != 0.0) ++nnz;
        const bool k_met = std::holds_alternative<ResidualSq>(stop) ? false : nnz >= k;
        const bool eps_met = std::holds_alternative<MaxNonzeros>(stop) ? false : rsq <= eps;
        if (k_met || eps_met) break;

        index_t jhat = 0;
        double best = -1.0;
        for (index_t j = 0; j < p; ++j) {
            const double c = std::fabs(dot(D.atom(j), r.data(), m));
            if (c > best) {
                best = c;
                jhat = j;
            }
        }
        if (best < 1e-14) {
            out.status = SolveStatus::ConvergedEarly;
            break;
        }
        const double c = dot(D.atom(jhat), r.data(), m);
        alpha[jhat] += c;
        const double* d = D.atom(jhat);
        for (index_t i = 0; i < m; ++i) r[i] -= c * d[i];
        rsq = norm2_sq(r);
        if (t + 1 == iter_cap) out.status = SolveStatus::IterationCap;
    }
    out.code = SparseCode::from_dense(alpha);
    out.residual_sq = rsq;
    return out;
}

/// Order-recursive OMP with Cholesky-accelerated selection. With a GramCache
/// the residual is never formed; correlations are updated through Q.
inline GreedyResult omp(const std::vector<double>& x, const Dictionary& D,
                        const StopRule& stop, const GramCache* cache = nullptr) {
    const index_t m = D.dim(), p = D.size();
    if (x.size() != m) throw std::invalid_argument("omp: dimension mismatch");
    const index_t k = detail::stop_k(stop, std::min(m, p));
    const double eps = detail::stop_eps(stop);
    const bool has_k = !std::holds_alternative<ResidualSq>(stop);
    const bool has_eps = !std::holds_alternative<MaxNonzeros>(stop);

    std::vector<double> corr(p);  // D^T r
    matvec_t(D.atoms, x, corr);
    std::vector<double> diag(p);
    for (index_t j = 0; j < p; ++j)
        diag[j] = cache ? cache->Q(j, j) : norm2_sq(D.atom(j), m);

    std::vector<index_t> support;
    std::vector<double> c;  // L^{-1} D_Gamma^T x
    CholFactor chol;
    std::vector<char> active(p, 0);
    double rsq = norm2_sq(x);
    GreedyResult out;
    out.status = SolveStatus::Converged;

    const index_t max_sel = std::min({k, m, p});
    while (support.size() < (has_k ? k : max_sel)) {
        if (has_eps && rsq <= eps) break;
        if (!has_k && support.size() >= max_sel) break;

        // candidate gain: (d_j^T r)^2 / schur_j
        index_t jhat = p;
        double best = 0.0;
        double s_best = 0.0;
        for (index_t j = 0; j < p; ++j) {
            if (active[j]) continue;
            std::vector<double> w(support.size());
            for (index_t t = 0; t < support.size(); ++t)
                w[t] = cache ? cache->Q(support[t], j)
                             : dot(D.atom(support[t]), D.atom(j), m);
            chol.forward_solve(w);
            const double s = diag[j] - norm2_sq(w);
            if (s <= 1e-12) continue;
            const double gain = corr[j] * corr[j] / s;
            if (jhat == p || gain > best) {  // ties keep the lowest index
                best = gain;
                jhat = j;
                s_best = s;
            }
        }
        if (jhat == p) {
            // every remaining candidate extension is rank-deficient
            out.status = support.empty() ? SolveStatus::ConvergedEarly
                                         : SolveStatus::DegenerateAtom;
            break;
        }
        if (best <= 1e-28) {  // no residual reduction available
            out.status = SolveStatus::ConvergedEarly;
            break;
        }
        // grow the factor; corr[jhat] == d_jhat^T r
        std::vector<double> g(support.size());
        for (index_t t = 0; t < support.size(); ++t)
            g[t] = cache ? cache->Q(support[t], jhat)
                         : dot(D.atom(support[t]), D.atom(jhat), m);
        auto schur = chol.append(g, diag[jhat]);
        if (!schur) {
            out.status = SolveStatus::DegenerateAtom;
            break;
        }
        const double c_new = corr[jhat] / std::sqrt(s_best);
        c.push_back(c_new);
        support.push_back(jhat);
        active[jhat] = 1;
        rsq -= c_new * c_new;

        // coefficients on the current support: solve L^T a = c
        std::vector<double> a(c);
        chol.backward_solve(a);

        // refresh correlations D^T r = D^T x - Q_Gamma a
        matvec_t(D.atoms, x, corr);
        for (index_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (index_t t = 0; t < support.size(); ++t) {
                acc += (cache ? cache->Q(j, support[t])
                              : dot(D.atom(j), D.atom(support[t]), m)) *
                       a[t];
            }
            corr[j] -= acc;
        }
    }

    // final least-squares coefficients
    std::vector<double> a(c);
    chol.backward_solve(a);
    std::vector<std::pair<index_t, double>> entries(support.size());
    for (index_t t = 0; t < support.size(); ++t) entries[t] = {support[t], a[t]};
    std::sort(entries.begin(), entries.end());
    SparseCode code(p);
    for (auto& [j, v] : entries) {
        code.support.push_back(j);
        code.coeffs.push_back(v);
    }
    out.code = std::move(code);
    out.residual_sq = std::max(rsq, 0.0);
    return out;
}

/// Column-wise OMP over X with one shared Gram matrix.
inline std::pair<DenseMatrix, std::vector<SolveStatus>> omp_batch(
    const DenseMatrix& X, const Dictionary& D, const StopRule& stop) {
    if (X.rows != D.dim()) throw std::invalid_argument("omp_batch: dimension mismatch");
    GramCache cache(D);
    DenseMatrix A(D.size(), X.cols);
    std::vector<SolveStatus> statuses(X.cols);
    for (index_t i = 0; i < X.cols; ++i) {
        std::vector<double> x(X.col(i), X.col(i) + X.rows);
        auto res = omp(x, D, stop, &cache);
        statuses[i] = res.status;
        const auto dense = res.code.to_dense();
        std::copy(dense.begin(), dense.end(), A.col(i));
    }
    return {std::move(A), std::move(statuses)};
}

/// Iterative hard thresholding: gradient step then hard threshold with
/// tau = k-th magnitude (TopK) or tau = sqrt(2 lambda) (Level).
inline SparseCode iht(const std::vector<double>& x, const Dictionary& D,
                      const HardThresholdMode& mode, double eta, index_t iters,
                      const SparseCode& alpha0) {
    if (eta <= 0.0) throw std::invalid_argument("iht: eta <= 0");
    const index_t m = D.dim(), p = D.size();
    if (x.size() != m || alpha0.dim != p)
        throw std::invalid_argument("iht: dimension mismatch");
    std::vector<double> alpha = alpha0.to_dense();
    std::vector<double> r(m), grad(p);
    for (index_t t = 0; t < iters; ++t) {
        matvec(D.atoms, alpha, r);
        for (index_t i = 0; i < m; ++i) r[i] = x[i] - r[i];
        matvec_t(D.atoms, r, grad);
        for (index_t j = 0; j < p; ++j) alpha[j] += eta * grad[j];
        if (const auto* tk = std::get_if<TopK>(&mode)) {
            alpha = hard_threshold(alpha, TopK{tk->k});
        } else {
            const double tau = std::sqrt(2.0 * std::get<Level>(mode).mu);
            alpha = hard_threshold(alpha, Level{tau});
        }
    }
    return SparseCode::from_dense(alpha);
}

}  // namespace sparsekit
