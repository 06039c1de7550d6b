#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sparsekit/convex.hpp"
#include "sparsekit/core.hpp"
#include "sparsekit/greedy.hpp"
#include "sparsekit/parallel.hpp"
#include "sparsekit/reweight.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

struct SgdSchedule {
    double eta = 0.1;   // eta_t = eta / (t + t0)^gamma
    double t0 = 10.0;
    double gamma = 0.75;
};

struct InitFromDataColumns {};
struct InitGiven {
    Dictionary D;
};
using DictInit = std::variant<InitFromDataColumns, InitGiven>;

struct LearnConfig {
    index_t p = 64;            // atom count
    double lambda = 0.1;       // l1 penalty weight
    index_t k = 4;             // l0 target sparsity
    double eps = 0.0;          // residual-constrained encode stop (0 = unused)
    double mu = 0.0;           // l1-norm constraint (0 = unused)
    index_t outer_iters = 10;
    std::uint64_t rng_seed = 0;
    DictInit init = InitFromDataColumns{};
    index_t minibatch = 1;
    SgdSchedule sgd_step;
    double online_rescale_rho = 0.0;  // gamma_t = (1 - 1/t)^rho; 0 disables
    unsigned threads = 1;
};

/// Accumulated B = sum x a^T and C = sum a a^T for online learning.
struct SufficientStats {
    DenseMatrix B;  // m x p
    DenseMatrix C;  // p x p
    index_t t = 0;

    SufficientStats(index_t m, index_t p) : B(m, p), C(p, p) {}

    void accumulate(const std::vector<double>& x, const std::vector<double>& a) {
        for (index_t j = 0; j < B.cols; ++j) {
            if (a[j] == 0.0) continue;
            double* bj = B.col(j);
            for (index_t i = 0; i < B.rows; ++i) bj[i] += x[i] * a[j];
            double* cj = C.col(j);
            for (index_t i = 0; i < C.rows; ++i) cj[i] += a[i] * a[j];
        }
        ++t;
    }

    void rescale(double gamma) {
        for (double& v : B.values) v *= gamma;
        for (double& v : C.values) v *= gamma;
    }
};

struct LearnTrace {
    std::vector<double> objectives;          // one per outer iteration
    std::vector<std::string> events;         // atom replacements etc.
};

struct LearnResult {
    Dictionary D;
    DenseMatrix codes;  // p x n
    LearnTrace trace;
};

namespace detail {

inline double frob_norm_sq(const DenseMatrix& M) {
    double s = 0.0;
    for (double v : M.values) s += v * v;
    return s;
}

/// (1/n) sum_i [ 1/2 ||x_i - D a_i||^2 + lambda * l1(a_i) ]
inline double dl_objective(const DenseMatrix& X, const Dictionary& D,
                           const DenseMatrix& A, double lambda_l1) {
    const index_t m = X.rows, n = X.cols, p = A.rows;
    double obj = 0.0;
    std::vector<double> r(m);
    for (index_t i = 0; i < n; ++i) {
        std::copy(X.col(i), X.col(i) + m, r.begin());
        const double* a = A.col(i);
        for (index_t j = 0; j < p; ++j) {
            if (a[j] == 0.0) continue;
            const double* d = D.atom(j);
            for (index_t row = 0; row < m; ++row) r[row] -= a[j] * d[row];
        }
        double l1 = 0.0;
        for (index_t j = 0; j < p; ++j) l1 += std::fabs(a[j]);
        obj += 0.5 * norm2_sq(r) + lambda_l1 * l1;
    }
    return obj / static_cast<double>(n);
}

inline Dictionary init_dictionary(const DenseMatrix& X, const LearnConfig& cfg) {
    if (const auto* given = std::get_if<InitGiven>(&cfg.init)) return given->D;
    // p distinct random training columns, projected to the unit ball
    if (X.cols < cfg.p)
        throw std::invalid_argument("dictionary init: fewer signals than atoms");
    Rng rng(cfg.rng_seed ^ 0xd1c7u);
    std::vector<index_t> perm(X.cols);
    for (index_t i = 0; i < X.cols; ++i) perm[i] = i;
    for (index_t i = X.cols; i-- > 1;)
        std::swap(perm[i], perm[static_cast<index_t>(rng.integer(i + 1))]);
    DenseMatrix D0(X.rows, cfg.p);
    for (index_t j = 0; j < cfg.p; ++j)
        std::copy(X.col(perm[j]), X.col(perm[j]) + X.rows, D0.col(j));
    return project_unit_columns(std::move(D0));
}

/// Index of the signal with the largest current residual norm.
inline index_t worst_residual_signal(const DenseMatrix& X, const Dictionary& D,
                                     const DenseMatrix& A) {
    const index_t m = X.rows;
    index_t worst = 0;
    double worst_val = -1.0;
    std::vector<double> r(m);
    for (index_t i = 0; i < X.cols; ++i) {
        std::copy(X.col(i), X.col(i) + m, r.begin());
        for (index_t j = 0; j < A.rows; ++j) {
            const double a = A(j, i);
            if (a == 0.0) continue;
            const double* d = D.atom(j);
            for (index_t row = 0; row < m; ++row) r[row] -= a * d[row];
        }
        const double v = norm2_sq(r);
        if (v > worst_val) {
            worst_val = v;
            worst = i;
        }
    }
    return worst;
}

inline void replace_atom(DenseMatrix& atoms, index_t j, const double* signal,
                         index_t m) {
    const double nrm = norm2(signal, m);
    const double inv = nrm > 0.0 ? 1.0 / nrm : 0.0;
    for (index_t i = 0; i < m; ++i) atoms(i, j) = signal[i] * inv;
}

}  // namespace detail

/// Block coordinate descent dictionary update over the quadratic surrogate
/// 1/2 tr(D^T D C) - tr(D^T B). Columns with C[j,j] = 0 are left untouched.
inline Dictionary dict_update_bcd(const Dictionary& D0, const DenseMatrix& B,
                                  const DenseMatrix& C, index_t passes = 10) {
    const index_t m = D0.dim(), p = D0.size();
    if (B.rows != m || B.cols != p || C.rows != p || C.cols != p)
        throw std::invalid_argument("dict_update_bcd: dimension mismatch");
    DenseMatrix atoms = D0.atoms;
    std::vector<double> dc(m);
    for (index_t pass = 0; pass < passes; ++pass) {
        for (index_t j = 0; j < p; ++j) {
            const double cjj = C(j, j);
            if (cjj <= 0.0) continue;
            // d_j <- (b_j - D c_j)/C[j,j] + d_j, then project to unit ball
            std::fill(dc.begin(), dc.end(), 0.0);
            for (index_t l = 0; l < p; ++l) {
                const double clj = C(l, j);
                if (clj == 0.0) continue;
                const double* dl = atoms.col(l);
                for (index_t i = 0; i < m; ++i) dc[i] += clj * dl[i];
            }
            double* dj = atoms.col(j);
            const double* bj = B.col(j);
            for (index_t i = 0; i < m; ++i) dj[i] += (bj[i] - dc[i]) / cjj;
            const double nrm = norm2(dj, m);
            if (nrm > 1.0) {
                for (index_t i = 0; i < m; ++i) dj[i] /= nrm;
            }
        }
    }
    return Dictionary(std::move(atoms));
}

/// Surrogate value 1/2 tr(D^T D C) - tr(D^T B) (the quantity dict_update_bcd descends).
inline double dict_surrogate_objective(const Dictionary& D, const DenseMatrix& B,
                                       const DenseMatrix& C) {
    const index_t m = D.dim(), p = D.size();
    double obj = 0.0;
    std::vector<double> dc(m);
    for (index_t j = 0; j < p; ++j) {
        std::fill(dc.begin(), dc.end(), 0.0);
        for (index_t l = 0; l < p; ++l) {
            const double clj = C(l, j);
            if (clj == 0.0) continue;
            const double* dl = D.atom(l);
            for (index_t i = 0; i < m; ++i) dc[i] += clj * dl[i];
        }
        obj += 0.5 * dot(D.atom(j), dc.data(), m) - dot(D.atom(j), B.col(j), m);
    }
    return obj;
}

/// Method of optimal directions: OMP encode, then D <- Pi_C[X A^T (A A^T)^-1].
inline LearnResult dl_mod(const DenseMatrix& X, const LearnConfig& cfg) {
    const index_t m = X.rows, n = X.cols, p = cfg.p;
    Dictionary D = detail::init_dictionary(X, cfg);
    LearnTrace trace;
    DenseMatrix A(p, n);
    for (index_t it = 0; it < cfg.outer_iters; ++it) {
        auto [codes, statuses] = omp_batch(X, D, MaxNonzeros{cfg.k});
        A = std::move(codes);
        // B = X A^T, C = A A^T
        DenseMatrix B(m, p), C(p, p);
        for (index_t i = 0; i < n; ++i) {
            const double* a = A.col(i);
            for (index_t j = 0; j < p; ++j) {
                if (a[j] == 0.0) continue;
                const double* x = X.col(i);
                double* bj = B.col(j);
                for (index_t row = 0; row < m; ++row) bj[row] += x[row] * a[j];
                double* cj = C.col(j);
                for (index_t l = 0; l < p; ++l) cj[l] += a[l] * a[j];
            }
        }
        // ridge-regularize a singular C before inversion
        double tr = 0.0;
        for (index_t j = 0; j < p; ++j) tr += C(j, j);
        const double ridge = 1e-10 * tr / static_cast<double>(p);
        for (index_t j = 0; j < p; ++j) C(j, j) += ridge;

        // unused atoms get replaced by the worst-reconstructed signal;
        // if no atom is used at all (lambda above every correlation) the
        // dictionary stays untouched
        if (tr > 0.0) {
            for (index_t j = 0; j < p; ++j) {
                if (C(j, j) <= ridge) {
                    const index_t w = detail::worst_residual_signal(X, D, A);
                    DenseMatrix atoms = D.atoms;
                    detail::replace_atom(atoms, j, X.col(w), m);
                    D = Dictionary(std::move(atoms));
                    trace.events.push_back("mod: replaced unused atom " + std::to_string(j));
                }
            }
        }

        // D_new = X A^T C^{-1}: solve C^T Y^T = (X A^T)^T column-block-wise;
        // C symmetric, so solve C y_row = b_row for each of the m rows of B.
        if (tr > 0.0) {
            DenseMatrix Dnew(m, p);
            for (index_t row = 0; row < m; ++row) {
                std::vector<double> b(p);
                for (index_t j = 0; j < p; ++j) b[j] = B(row, j);
                auto y = sparsekit::detail::spd_solve(C, std::move(b));
                for (index_t j = 0; j < p; ++j) Dnew(row, j) = y[j];
            }
            D = project_unit_columns(std::move(Dnew));
        }
        trace.objectives.push_back(detail::dl_objective(X, D, A, 0.0));
    }
    return {std::move(D), std::move(A), std::move(trace)};
}

/// Alternate minimization with l1 encoding (homotopy) and BCD dictionary updates.
inline LearnResult dl_alt_l1(const DenseMatrix& X, const LearnConfig& cfg) {
    const index_t m = X.rows, n = X.cols, p = cfg.p;
    Dictionary D = detail::init_dictionary(X, cfg);
    LearnTrace trace;
    DenseMatrix A(p, n);
    HomotopyOptions hopt;
    hopt.ridge = 1e-10;  // keeps the path unique on correlated patch data
    for (index_t it = 0; it < cfg.outer_iters; ++it) {
        GramCache cache(D);
        parallel_for(n, cfg.threads, [&](index_t i) {
            std::vector<double> x(X.col(i), X.col(i) + m);
            HomotopyStop stop = cfg.mu > 0.0 ? HomotopyStop(AtNorm{cfg.mu})
                                             : HomotopyStop(AtLambda{cfg.lambda});
            SparseCode code = cfg.mu > 0.0
                                  ? homotopy_solve(x, D, stop, hopt, &cache)
                                  : lasso_encode_robust(x, D, cfg.lambda, hopt, &cache);
            std::fill(A.col(i), A.col(i) + p, 0.0);
            for (index_t t = 0; t < code.support.size(); ++t)
                A(code.support[t], i) = code.coeffs[t];
        });
        DenseMatrix B(m, p), C(p, p);
        for (index_t i = 0; i < n; ++i) {
            const double* a = A.col(i);
            for (index_t j = 0; j < p; ++j) {
                if (a[j] == 0.0) continue;
                const double* x = X.col(i);
                double* bj = B.col(j);
                for (index_t row = 0; row < m; ++row) bj[row] += x[row] * a[j];
                double* cj = C.col(j);
                for (index_t l = 0; l < p; ++l) cj[l] += a[l] * a[j];
            }
        }
        double csum = 0.0;
        for (index_t j = 0; j < p; ++j) csum += C(j, j);
        if (csum > 0.0) {
            for (index_t j = 0; j < p; ++j) {
                if (C(j, j) == 0.0) {
                    const index_t w = detail::worst_residual_signal(X, D, A);
                    DenseMatrix atoms = D.atoms;
                    detail::replace_atom(atoms, j, X.col(w), m);
                    D = Dictionary(std::move(atoms));
                    trace.events.push_back("alt_l1: replaced unused atom " + std::to_string(j));
                }
            }
        }
        D = dict_update_bcd(D, B, C, 10);
        trace.objectives.push_back(detail::dl_objective(X, D, A, cfg.mu > 0.0 ? 0.0 : cfg.lambda));
    }
    return {std::move(D), std::move(A), std::move(trace)};
}

/// Full block coordinate descent: row-wise soft-threshold updates of A,
/// then BCD dictionary sweeps.
inline LearnResult dl_bcd(const DenseMatrix& X, const LearnConfig& cfg,
                          index_t code_passes = 1) {
    const index_t m = X.rows, n = X.cols, p = cfg.p;
    Dictionary D = detail::init_dictionary(X, cfg);
    LearnTrace trace;
    DenseMatrix A(p, n);
    // residual R = X - D A maintained across row updates
    DenseMatrix R = X;
    for (index_t it = 0; it < cfg.outer_iters; ++it) {
        for (index_t pass = 0; pass < code_passes; ++pass) {
            for (index_t j = 0; j < p; ++j) {
                const double* dj = D.atom(j);
                const double djsq = norm2_sq(dj, m);
                if (djsq <= 0.0) {
                    trace.events.push_back("bcd: skipped zero-norm atom " + std::to_string(j));
                    continue;
                }
                for (index_t i = 0; i < n; ++i) {
                    const double old = A(j, i);
                    const double corr = old + dot(dj, R.col(i), m) / djsq;
                    const double next = soft_threshold_scalar(corr, cfg.lambda / djsq);
                    const double delta = next - old;
                    if (delta == 0.0) continue;
                    A(j, i) = next;
                    double* ri = R.col(i);
                    for (index_t row = 0; row < m; ++row) ri[row] -= delta * dj[row];
                }
            }
        }
        DenseMatrix B(m, p), C(p, p);
        for (index_t i = 0; i < n; ++i) {
            const double* a = A.col(i);
            for (index_t j = 0; j < p; ++j) {
                if (a[j] == 0.0) continue;
                const double* x = X.col(i);
                double* bj = B.col(j);
                for (index_t row = 0; row < m; ++row) bj[row] += x[row] * a[j];
                double* cj = C.col(j);
                for (index_t l = 0; l < p; ++l) cj[l] += a[l] * a[j];
            }
        }
        D = dict_update_bcd(D, B, C, 10);
        // refresh the residual for the updated dictionary
        R = X;
        for (index_t i = 0; i < n; ++i) {
            const double* a = A.col(i);
            double* ri = R.col(i);
            for (index_t j = 0; j < p; ++j) {
                if (a[j] == 0.0) continue;
                const double* dj = D.atom(j);
                for (index_t row = 0; row < m; ++row) ri[row] -= a[j] * dj[row];
            }
        }
        trace.objectives.push_back(detail::dl_objective(X, D, A, cfg.lambda));
    }
    return {std::move(D), std::move(A), std::move(trace)};
}

namespace detail {

/// Best rank-1 fit of the implicit residual E = R + d_j a^j restricted to the
/// signals in omega, by power iteration. Returns (d, beta).
inline void ksvd_rank1(const DenseMatrix& R, const std::vector<index_t>& omega,
                       const double* dj, const std::vector<double>& aj_omega,
                       std::vector<double>& d_out, std::vector<double>& beta_out,
                       index_t max_iters = 30) {
    const index_t m = R.rows, k = omega.size();
    // E columns: E_t = R[:, omega[t]] + a_t * d_j
    std::vector<double> d(dj, dj + m);
    double dn = norm2(d);
    if (dn == 0.0) {
        d.assign(m, 0.0);
        d[0] = 1.0;
        dn = 1.0;
    }
    for (index_t i = 0; i < m; ++i) d[i] /= dn;
    std::vector<double> beta(k, 0.0);
    double prev = 0.0;
    for (index_t it = 0; it < max_iters; ++it) {
        // beta = E^T d
        for (index_t t = 0; t < k; ++t)
            beta[t] = dot(R.col(omega[t]), d.data(), m) + aj_omega[t] * dot(dj, d.data(), m);
        // d = E beta / ||E beta||
        std::vector<double> v(m, 0.0);
        for (index_t t = 0; t < k; ++t) {
            const double* rc = R.col(omega[t]);
            for (index_t i = 0; i < m; ++i) v[i] += beta[t] * rc[i];
        }
        const double bdota = dot(beta.data(), aj_omega.data(), k);
        for (index_t i = 0; i < m; ++i) v[i] += bdota * dj[i];
        const double vn = norm2(v);
        if (vn == 0.0) break;
        for (index_t i = 0; i < m; ++i) d[i] = v[i] / vn;
        if (std::fabs(vn - prev) <= 1e-10 * vn) break;
        prev = vn;
    }
    // final coefficients for the normalized d
    for (index_t t = 0; t < k; ++t)
        beta[t] = dot(R.col(omega[t]), d.data(), m) + aj_omega[t] * dot(dj, d.data(), m);
    d_out = std::move(d);
    beta_out = std::move(beta);
}

}  // namespace detail

/// K-SVD: OMP encode, then per-atom rank-1 refit of atom and used coefficients.
inline LearnResult dl_ksvd(const DenseMatrix& X, const LearnConfig& cfg) {
    const index_t m = X.rows, n = X.cols, p = cfg.p;
    Dictionary D = detail::init_dictionary(X, cfg);
    LearnTrace trace;
    DenseMatrix A(p, n);
    const StopRule stop = cfg.eps > 0.0 ? StopRule(BothStop{cfg.k, cfg.eps})
                                        : StopRule(MaxNonzeros{cfg.k});
    for (index_t it = 0; it < cfg.outer_iters; ++it) {
        auto [codes, statuses] = omp_batch(X, D, stop);
        A = std::move(codes);
        // residual R = X - D A
        DenseMatrix R = X;
        for (index_t i = 0; i < n; ++i) {
            const double* a = A.col(i);
            double* ri = R.col(i);
            for (index_t j = 0; j < p; ++j) {
                if (a[j] == 0.0) continue;
                const double* dj = D.atom(j);
                for (index_t row = 0; row < m; ++row) ri[row] -= a[j] * dj[row];
            }
        }
        DenseMatrix atoms = D.atoms;
        bool any_used = false;
        for (double v : A.values)
            if (v != 0.0) { any_used = true; break; }
        for (index_t j = 0; j < p; ++j) {
            std::vector<index_t> omega;
            std::vector<double> aj;
            for (index_t i = 0; i < n; ++i) {
                if (A(j, i) != 0.0) {
                    omega.push_back(i);
                    aj.push_back(A(j, i));
                }
            }
            if (omega.empty()) {
                if (!any_used) continue;
                const index_t w = detail::worst_residual_signal(X, Dictionary(atoms), A);
                detail::replace_atom(atoms, j, X.col(w), m);
                trace.events.push_back("ksvd: replaced unused atom " + std::to_string(j));
                continue;
            }
            std::vector<double> d_new, beta;
            detail::ksvd_rank1(R, omega, atoms.col(j), aj, d_new, beta);
            // fold the change back into the residual: R += d_old a_old - d_new beta
            for (index_t t = 0; t < omega.size(); ++t) {
                double* rc = R.col(omega[t]);
                const double* d_old = atoms.col(j);
                for (index_t i = 0; i < m; ++i)
                    rc[i] += aj[t] * d_old[i] - beta[t] * d_new[i];
                A(j, omega[t]) = beta[t];
            }
            std::copy(d_new.begin(), d_new.end(), atoms.col(j));
        }
        D = Dictionary(std::move(atoms));
        trace.objectives.push_back(detail::dl_objective(X, D, A, 0.0));
    }
    return {std::move(D), std::move(A), std::move(trace)};
}

/// Projected stochastic gradient descent over random draws from X.
inline std::pair<Dictionary, LearnTrace> dl_sgd(const DenseMatrix& X,
                                                const LearnConfig& cfg,
                                                index_t total_draws) {
    const index_t m = X.rows, p = cfg.p;
    Dictionary D = detail::init_dictionary(X, cfg);
    LearnTrace trace;
    Rng rng(cfg.rng_seed);
    HomotopyOptions hopt;
    hopt.ridge = 1e-10;
    for (index_t t = 1; t <= total_draws; ++t) {
        const index_t i = static_cast<index_t>(rng.integer(X.cols));
        std::vector<double> x(X.col(i), X.col(i) + m);
        auto code = lasso_encode_robust(x, D, cfg.lambda, hopt);
        if (code.nnz() == 0) continue;  // zero gradient
        const double eta_t =
            cfg.sgd_step.eta / std::pow(static_cast<double>(t) + cfg.sgd_step.t0,
                                        cfg.sgd_step.gamma);
        // D <- Pi_C[ D - eta_t (D a - x) a^T ]
        std::vector<double> residual(x);
        const auto dense = code.to_dense();
        for (index_t j = 0; j < p; ++j) {
            if (dense[j] == 0.0) continue;
            const double* dj = D.atom(j);
            for (index_t row = 0; row < m; ++row) residual[row] -= dense[j] * dj[row];
        }
        DenseMatrix atoms = D.atoms;
        for (index_t j = 0; j < p; ++j) {
            if (dense[j] == 0.0) continue;
            double* dj = atoms.col(j);
            for (index_t row = 0; row < m; ++row)
                dj[row] += eta_t * residual[row] * dense[j];
        }
        D = project_unit_columns(std::move(atoms));
    }
    return {std::move(D), std::move(trace)};
}

struct OnlineResult {
    Dictionary D;
    SufficientStats stats;
    LearnTrace trace;
};

/// Online dictionary learning with sufficient statistics (optionally
/// mini-batched and with past-rescaling gamma_t = (1 - 1/t)^rho).
inline OnlineResult dl_online(const DenseMatrix& X, const LearnConfig& cfg,
                              index_t total_draws) {
    const index_t m = X.rows, p = cfg.p;
    Dictionary D = detail::init_dictionary(X, cfg);
    SufficientStats stats(m, p);
    LearnTrace trace;
    Rng rng(cfg.rng_seed);
    HomotopyOptions hopt;
    hopt.ridge = 1e-10;
    const index_t batch = std::max<index_t>(cfg.minibatch, 1);
    index_t drawn = 0;
    index_t step = 0;
    while (drawn < total_draws) {
        ++step;
        if (cfg.online_rescale_rho > 0.0 && step > 1) {
            const double gamma_t =
                std::pow(1.0 - 1.0 / static_cast<double>(step), cfg.online_rescale_rho);
            stats.rescale(gamma_t);
        }
        const index_t take = std::min<index_t>(batch, total_draws - drawn);
        GramCache cache(D);
        for (index_t b = 0; b < take; ++b) {
            const index_t i = static_cast<index_t>(rng.integer(X.cols));
            std::vector<double> x(X.col(i), X.col(i) + m);
            auto code = lasso_encode_robust(x, D, cfg.lambda, hopt, &cache);
            stats.accumulate(x, code.to_dense());
        }
        drawn += take;
        D = dict_update_bcd(D, stats.B, stats.C, 1);
        trace.objectives.push_back(
            dict_surrogate_objective(D, stats.B, stats.C) / static_cast<double>(stats.t));
    }
    return {std::move(D), std::move(stats), std::move(trace)};
}

struct KmeansResult {
    DenseMatrix centroids;  // m x p
    std::vector<index_t> labels;
    std::vector<double> objectives;  // per iteration
};

/// Lloyd's algorithm; ties to the lowest centroid index, empty clusters
/// reseeded with the point of largest current residual.
inline KmeansResult kmeans(const DenseMatrix& X, index_t p, index_t iters,
                           std::uint64_t seed) {
    const index_t m = X.rows, n = X.cols;
    if (p > n) throw std::invalid_argument("kmeans: more centroids than points");
    Rng rng(seed);
    std::vector<index_t> perm(n);
    for (index_t i = 0; i < n; ++i) perm[i] = i;
    for (index_t i = n; i-- > 1;)
        std::swap(perm[i], perm[static_cast<index_t>(rng.integer(i + 1))]);
    DenseMatrix cent(m, p);
    for (index_t j = 0; j < p; ++j)
        std::copy(X.col(perm[j]), X.col(perm[j]) + m, cent.col(j));

    KmeansResult out;
    out.labels.assign(n, 0);
    std::vector<double> dist(n);
    for (index_t it = 0; it < iters; ++it) {
        double obj = 0.0;
        for (index_t i = 0; i < n; ++i) {
            index_t best = 0;
            double best_d = -1.0;
            for (index_t j = 0; j < p; ++j) {
                double d = 0.0;
                const double* c = cent.col(j);
                const double* x = X.col(i);
                for (index_t row = 0; row < m; ++row) {
                    const double diff = x[row] - c[row];
                    d += diff * diff;
                }
                if (best_d < 0.0 || d < best_d) {  // strict < keeps lowest index on ties
                    best_d = d;
                    best = j;
                }
            }
            out.labels[i] = best;
            dist[i] = best_d;
            obj += best_d;
        }
        out.objectives.push_back(obj / static_cast<double>(n));
        // recompute means
        DenseMatrix next(m, p);
        std::vector<index_t> count(p, 0);
        for (index_t i = 0; i < n; ++i) {
            double* c = next.col(out.labels[i]);
            const double* x = X.col(i);
            for (index_t row = 0; row < m; ++row) c[row] += x[row];
            ++count[out.labels[i]];
        }
        for (index_t j = 0; j < p; ++j) {
            if (count[j] == 0) {
                // reseed with the worst-represented point
                index_t w = 0;
                double wv = -1.0;
                for (index_t i = 0; i < n; ++i)
                    if (dist[i] > wv) {
                        wv = dist[i];
                        w = i;
                    }
                std::copy(X.col(w), X.col(w) + m, next.col(j));
                dist[w] = 0.0;
            } else {
                double* c = next.col(j);
                for (index_t row = 0; row < m; ++row)
                    c[row] /= static_cast<double>(count[j]);
            }
        }
        cent = std::move(next);
    }
    out.centroids = std::move(cent);
    return out;
}

}  // namespace sparsekit
