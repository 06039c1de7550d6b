#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sparsekit/convex.hpp"
#include "sparsekit/core.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

struct ReweightConfig {
    double eps = 1e-3;        // smoothing, > 0
    index_t outer_iters = 20;
    SolverOptions inner;
    bool anneal = false;      // halve eps per outer iteration, floor 1e-10
};

namespace detail {

/// Dense Cholesky solve of A y = b for symmetric positive-definite A (in place).
inline std::vector<double> spd_solve(DenseMatrix A, std::vector<double> b) {
    const index_t n = A.rows;
    // factor A = L L^T, L stored in the lower triangle
    for (index_t j = 0; j < n; ++j) {
        double d = A(j, j);
        for (index_t k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
        if (d <= 0.0) throw std::runtime_error("spd_solve: matrix not positive definite");
        const double Ljj = std::sqrt(d);
        A(j, j) = Ljj;
        for (index_t i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (index_t k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
            A(i, j) = s / Ljj;
        }
    }
    for (index_t i = 0; i < n; ++i) {  // L y = b
        double s = b[i];
        for (index_t k = 0; k < i; ++k) s -= A(i, k) * b[k];
        b[i] = s / A(i, i);
    }
    for (index_t ii = n; ii-- > 0;) {  // L^T x = y
        double s = b[ii];
        for (index_t k = ii + 1; k < n; ++k) s -= A(k, ii) * b[k];
        b[ii] = s / A(ii, ii);
    }
    return b;
}

/// Stabilized weighted-ridge solve: alpha = E (E Q E + lambda I)^{-1} E D^T x,
/// with E = Diag(sqrt(eta)). Well conditioned even when entries of eta vanish.
inline std::vector<double> weighted_ridge(const Dictionary& D,
                                          const std::vector<double>& dtx,
                                          const std::vector<double>& eta,
                                          double lambda) {
    const index_t m = D.dim(), p = D.size();
    std::vector<double> e(p);
    for (index_t j = 0; j < p; ++j) e[j] = std::sqrt(eta[j]);
    DenseMatrix M(p, p);
    for (index_t j = 0; j < p; ++j) {
        for (index_t i = 0; i <= j; ++i) {
            const double q = dot(D.atom(i), D.atom(j), m) * e[i] * e[j];
            M(i, j) = q;
            M(j, i) = q;
        }
        M(j, j) += lambda;
    }
    std::vector<double> rhs(p);
    for (index_t j = 0; j < p; ++j) rhs[j] = e[j] * dtx[j];
    auto y = spd_solve(std::move(M), std::move(rhs));
    for (index_t j = 0; j < p; ++j) y[j] *= e[j];
    return y;
}

}  // namespace detail

/// DC-programming scheme for the log penalty: a sequence of weighted Lassos
/// with weights 1 / (|alpha_old| + eps).
inline SparseCode reweighted_l1(const std::vector<double>& x, const Dictionary& D,
                                double lambda, const ReweightConfig& cfg,
                                const SparseCode& alpha0) {
    if (cfg.eps <= 0.0) throw std::invalid_argument("reweighted_l1: eps <= 0");
    if (lambda <= 0.0) throw std::invalid_argument("reweighted_l1: lambda <= 0");
    const index_t p = D.size();
    SparseCode alpha = alpha0.dim ? alpha0 : SparseCode(p);
    double eps = cfg.eps;
    for (index_t outer = 0; outer < cfg.outer_iters; ++outer) {
        const auto dense = alpha.to_dense();
        CdPenalty pen;
        pen.weights.resize(p);
        for (index_t j = 0; j < p; ++j)
            pen.weights[j] = 1.0 / (std::fabs(dense[j]) + eps);
        SparseCode next = cd_lasso(x, D, lambda, cfg.inner, alpha, pen);
        const auto nd = next.to_dense();
        double change = 0.0;
        for (index_t j = 0; j < p; ++j) change += (nd[j] - dense[j]) * (nd[j] - dense[j]);
        alpha = std::move(next);
        if (std::sqrt(change) < 1e-9 * (norm2(nd) + 1e-30)) break;
        if (cfg.anneal) eps = std::max(eps * 0.5, 1e-10);
    }
    return alpha;
}

/// Log-penalized objective tracked by reweighted_l1.
inline double reweighted_l1_objective(const std::vector<double>& x, const Dictionary& D,
                                      const SparseCode& alpha, double lambda, double eps) {
    const auto dense = alpha.to_dense();
    std::vector<double> r;
    matvec(D.atoms, dense, r);
    for (index_t i = 0; i < r.size(); ++i) r[i] = x[i] - r[i];
    double pen = 0.0;
    for (double a : dense) pen += std::log(std::fabs(a) + eps);
    return 0.5 * norm2_sq(r) + lambda * pen;
}

/// IRLS for the l1 variational form: eta_j = sqrt(alpha_j^2 + eps), then a
/// weighted ridge solve.
inline SparseCode irls_l1(const std::vector<double>& x, const Dictionary& D,
                          double lambda, const ReweightConfig& cfg) {
    if (cfg.eps <= 0.0) throw std::invalid_argument("irls_l1: eps <= 0");
    const index_t p = D.size();
    std::vector<double> dtx(p);
    matvec_t(D.atoms, x, dtx);
    std::vector<double> alpha(p, 0.0), eta(p);
    double eps = cfg.eps;
    for (index_t outer = 0; outer < cfg.outer_iters; ++outer) {
        for (index_t j = 0; j < p; ++j) eta[j] = std::sqrt(alpha[j] * alpha[j] + eps);
        auto next = detail::weighted_ridge(D, dtx, eta, lambda);
        double change = 0.0;
        for (index_t j = 0; j < p; ++j) change += (next[j] - alpha[j]) * (next[j] - alpha[j]);
        alpha = std::move(next);
        if (std::sqrt(change) < 1e-9 * (norm2(alpha) + 1e-30)) break;
        if (cfg.anneal) eps = std::max(eps * 0.5, 1e-10);
    }
    return SparseCode::from_dense(alpha);
}

/// Joint variational objective for irls_l1 at given (alpha, eta).
inline double irls_l1_objective(const std::vector<double>& x, const Dictionary& D,
                                const std::vector<double>& alpha, double lambda,
                                double eps) {
    std::vector<double> r;
    matvec(D.atoms, alpha, r);
    for (index_t i = 0; i < r.size(); ++i) r[i] = x[i] - r[i];
    double pen = 0.0;
    for (double a : alpha) {
        const double eta = std::sqrt(a * a + eps);
        pen += a * a / eta + eta + eps / eta;
    }
    return 0.5 * norm2_sq(r) + 0.5 * lambda * pen;
}

/// IRLS for the lq quasi-norm, q in (0,2):
/// eta_j = |alpha_j|^{2-q} ||alpha||_q^{q-1}, eps-smoothed.
inline SparseCode irls_lq(const std::vector<double>& x, const Dictionary& D,
                          double lambda, double q, const ReweightConfig& cfg) {
    if (q <= 0.0 || q >= 2.0) throw std::invalid_argument("irls_lq: q outside (0,2)");
    if (cfg.eps <= 0.0) throw std::invalid_argument("irls_lq: eps <= 0");
    const index_t p = D.size();
    std::vector<double> dtx(p);
    matvec_t(D.atoms, x, dtx);
    std::vector<double> alpha(p, 0.0), eta(p);
    double eps = cfg.eps;
    for (index_t outer = 0; outer < cfg.outer_iters; ++outer) {
        // eps-smoothed magnitudes keep the q=1 case identical to irls_l1
        double norm_q = 0.0;
        for (double a : alpha) norm_q += std::pow(std::sqrt(a * a + eps), q);
        norm_q = std::pow(norm_q, 1.0 / q);
        for (index_t j = 0; j < p; ++j) {
            const double mag = std::sqrt(alpha[j] * alpha[j] + eps);
            eta[j] = std::pow(mag, 2.0 - q) * std::pow(norm_q, q - 1.0);
        }
        auto next = detail::weighted_ridge(D, dtx, eta, lambda);
        double change = 0.0;
        for (index_t j = 0; j < p; ++j) change += (next[j] - alpha[j]) * (next[j] - alpha[j]);
        alpha = std::move(next);
        if (std::sqrt(change) < 1e-9 * (norm2(alpha) + 1e-30)) break;
        if (cfg.anneal) eps = std::max(eps * 0.5, 1e-10);
    }
    return SparseCode::from_dense(alpha);
}

/// IRLS for the group norm: eta_g = sqrt(||alpha_g||^2 + eps), block-shared.
inline SparseCode irls_group(const std::vector<double>& x, const Dictionary& D,
                             double lambda, const GroupStructure& G,
                             const ReweightConfig& cfg) {
    if (cfg.eps <= 0.0) throw std::invalid_argument("irls_group: eps <= 0");
    const index_t p = D.size();
    G.validate(p);
    std::vector<double> dtx(p);
    matvec_t(D.atoms, x, dtx);
    std::vector<double> alpha(p, 0.0), eta(p);
    double eps = cfg.eps;
    for (index_t outer = 0; outer < cfg.outer_iters; ++outer) {
        for (const auto& g : G.groups) {
            double nsq = 0.0;
            for (index_t i : g) nsq += alpha[i] * alpha[i];
            const double eg = std::sqrt(nsq + eps);
            for (index_t i : g) eta[i] = eg;
        }
        auto next = detail::weighted_ridge(D, dtx, eta, lambda);
        double change = 0.0;
        for (index_t j = 0; j < p; ++j) change += (next[j] - alpha[j]) * (next[j] - alpha[j]);
        alpha = std::move(next);
        if (std::sqrt(change) < 1e-9 * (norm2(alpha) + 1e-30)) break;
        if (cfg.anneal) eps = std::max(eps * 0.5, 1e-10);
    }
    return SparseCode::from_dense(alpha);
}

/// Group-Lasso objective 1/2||x - D a||^2 + lambda sum_g ||a_g||.
inline double group_lasso_objective(const std::vector<double>& x, const Dictionary& D,
                                    const std::vector<double>& alpha,
                                    const GroupStructure& G, double lambda) {
    std::vector<double> r;
    matvec(D.atoms, alpha, r);
    for (index_t i = 0; i < r.size(); ++i) r[i] = x[i] - r[i];
    double pen = 0.0;
    for (const auto& g : G.groups) {
        double nsq = 0.0;
        for (index_t i : g) nsq += alpha[i] * alpha[i];
        pen += std::sqrt(nsq);
    }
    return 0.5 * norm2_sq(r) + lambda * pen;
}

}  // namespace sparsekit
