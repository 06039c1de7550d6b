#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sparsekit/core.hpp"
#include "sparsekit/greedy.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

struct Penalized {
    double lambda;  // >= 0
};
struct ResidualConstrained {
    double eps;  // >= 0
};
struct NormConstrained {
    double mu;  // >= 0
};
using LassoForm = std::variant<Penalized, ResidualConstrained, NormConstrained>;

struct LassoProblem {
    std::vector<double> x;
    const Dictionary* D = nullptr;
    LassoForm form;
};

struct SolverOptions {
    index_t max_iter = 1000;
    double tol = 1e-6;       // KKT-based stopping tolerance
    bool accelerate = false; // FISTA
};

/// Ordered kinks (lambda strictly decreasing) of the piecewise-linear Lasso path.
struct RegPath {
    std::vector<std::pair<double, SparseCode>> kinks;
};

struct DegeneratePathError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double lasso_objective(const std::vector<double>& x, const Dictionary& D,
                              const std::vector<double>& alpha, double lambda,
                              double elastic_gamma = 0.0) {
    std::vector<double> r;
    matvec(D.atoms, alpha, r);
    for (index_t i = 0; i < r.size(); ++i) r[i] = x[i] - r[i];
    return 0.5 * norm2_sq(r) + lambda * norm1(alpha) +
           0.5 * elastic_gamma * norm2_sq(alpha);
}

enum class CdOrder { Cyclic, Random, Greedy };

struct CdPenalty {
    // lambda * sum_j w_j |a_j|  +  gamma/2 ||a||^2 ; plain Lasso has w = 1, gamma = 0
    double gamma = 0.0;
    std::vector<double> weights;  // empty = uniform 1
};

/// Coordinate descent for the (elastic-net / weighted) Lasso. Maintains the
/// z = D^T(x - D alpha) auxiliary through a precomputed Gram when p <= 4096,
/// else updates the residual directly.
inline SparseCode cd_lasso(const std::vector<double>& x, const Dictionary& D,
                           double lambda, const SolverOptions& opts,
                           const SparseCode& alpha0, const CdPenalty& pen = {},
                           CdOrder order = CdOrder::Cyclic,
                           const GramCache* cache = nullptr, Rng* rng = nullptr) {
    const index_t m = D.dim(), p = D.size();
    if (x.size() != m || alpha0.dim != p)
        throw std::invalid_argument("cd_lasso: dimension mismatch");
    std::vector<double> diag(p);
    for (index_t j = 0; j < p; ++j) {
        diag[j] = cache ? cache->Q(j, j) : norm2_sq(D.atom(j), m);
        if (diag[j] <= 0.0) throw std::invalid_argument("cd_lasso: zero-norm atom");
    }
    const bool use_gram = cache != nullptr || p <= 4096;
    std::optional<GramCache> local;
    if (use_gram && !cache) local.emplace(D);
    const GramCache* Q = cache ? cache : (local ? &*local : nullptr);

    std::vector<double> alpha = alpha0.to_dense();
    std::vector<double> z(p);  // D^T (x - D alpha)  (Gram strategy)
    std::vector<double> r;     // x - D alpha        (residual strategy)
    if (Q) {
        matvec_t(D.atoms, x, z);
        for (index_t j = 0; j < p; ++j) {
            if (alpha[j] == 0.0) continue;
            const double aj = alpha[j];
            for (index_t i = 0; i < p; ++i) z[i] -= Q->Q(i, j) * aj;
        }
    } else {
        matvec(D.atoms, alpha, r);
        for (index_t i = 0; i < m; ++i) r[i] = x[i] - r[i];
    }

    auto weight = [&](index_t j) {
        return pen.weights.empty() ? 1.0 : pen.weights[j];
    };
    auto corr = [&](index_t j) {
        return Q ? z[j] : dot(D.atom(j), r.data(), m);
    };
    auto update = [&](index_t j) {
        const double cj = corr(j) + diag[j] * alpha[j];  // d_j^T (x - D a_{-j})
        const double next = soft_threshold_scalar(cj, lambda * weight(j)) /
                            (diag[j] + pen.gamma);
        const double delta = next - alpha[j];
        if (delta == 0.0) return;
        alpha[j] = next;
        if (Q) {
            const double* qc = Q->Q.col(j);
            for (index_t i = 0; i < p; ++i) z[i] -= qc[i] * delta;
        } else {
            const double* d = D.atom(j);
            for (index_t i = 0; i < m; ++i) r[i] -= d[i] * delta;
        }
    };

    for (index_t cycle = 0; cycle < opts.max_iter; ++cycle) {
        if (order == CdOrder::Cyclic) {
            for (index_t j = 0; j < p; ++j) update(j);
        } else if (order == CdOrder::Random) {
            if (!rng) throw std::invalid_argument("cd_lasso: random order needs an rng");
            for (index_t t = 0; t < p; ++t) update(static_cast<index_t>(rng->integer(p)));
        } else {  // greedy: largest partial-derivative magnitude, MP style
            for (index_t t = 0; t < p; ++t) {
                index_t jbest = 0;
                double best = -1.0;
                for (index_t j = 0; j < p; ++j) {
                    const double v = std::fabs(corr(j));
                    if (v > best) {
                        best = v;
                        jbest = j;
                    }
                }
                update(jbest);
            }
        }
        // KKT-based stop on the weighted problem
        double va = 0.0, vi = 0.0;
        for (index_t j = 0; j < p; ++j) {
            const double grad = -corr(j) + pen.gamma * alpha[j];
            const double lw = lambda * weight(j);
            if (alpha[j] != 0.0)
                va = std::max(va, std::fabs(grad + lw * (alpha[j] > 0 ? 1.0 : -1.0)));
            else
                vi = std::max(vi, std::max(0.0, std::fabs(grad) - lw));
        }
        if (va <= opts.tol && vi <= opts.tol) break;
    }
    return SparseCode::from_dense(alpha);
}

/// Proximal gradient (ISTA, optionally FISTA) for the penalized or
/// l1-ball-constrained Lasso.
inline SparseCode prox_grad(const LassoProblem& prob, const SolverOptions& opts,
                            const SparseCode& alpha0, double step = 0.0) {
    const Dictionary& D = *prob.D;
    const index_t m = D.dim(), p = D.size();
    if (prob.x.size() != m || alpha0.dim != p)
        throw std::invalid_argument("prox_grad: dimension mismatch");
    if (std::holds_alternative<ResidualConstrained>(prob.form))
        throw std::invalid_argument("prox_grad: residual-constrained form unsupported");
    const bool constrained = std::holds_alternative<NormConstrained>(prob.form);
    const double lambda = constrained ? 0.0 : std::get<Penalized>(prob.form).lambda;
    const double mu = constrained ? std::get<NormConstrained>(prob.form).mu : 0.0;
    if (constrained && mu <= 0.0) throw std::invalid_argument("prox_grad: mu <= 0");

    const double eta = step > 0.0 ? step : 1.0 / gram_spectral_norm(D);
    std::vector<double> alpha = alpha0.to_dense();
    std::vector<double> y = alpha;  // FISTA extrapolation point
    double t_momentum = 1.0;
    std::vector<double> r(m), grad(p);

    for (index_t it = 0; it < opts.max_iter; ++it) {
        const std::vector<double>& base = opts.accelerate ? y : alpha;
        matvec(D.atoms, base, r);
        for (index_t i = 0; i < m; ++i) r[i] = prob.x[i] - r[i];
        matvec_t(D.atoms, r, grad);
        std::vector<double> next(p);
        for (index_t j = 0; j < p; ++j) next[j] = base[j] + eta * grad[j];
        next = constrained ? project_l1_ball(next, mu)
                           : soft_threshold(next, eta * lambda);

        if (opts.accelerate) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
            const double beta = (t_momentum - 1.0) / t_next;
            for (index_t j = 0; j < p; ++j) y[j] = next[j] + beta * (next[j] - alpha[j]);
            t_momentum = t_next;
        }
        double delta = 0.0;
        for (index_t j = 0; j < p; ++j) delta = std::max(delta, std::fabs(next[j] - alpha[j]));
        alpha = std::move(next);

        if (!constrained) {
            auto rep = lasso_kkt_check(prob.x, D, SparseCode::from_dense(alpha), lambda,
                                       0.0, opts.tol);
            if (rep.passed) break;
        } else if (delta <= opts.tol * (norm2(alpha) + 1e-30)) {
            break;
        }
    }
    return SparseCode::from_dense(alpha);
}

struct AtLambda {
    double lambda;
};
struct AtResidual {
    double eps;
};
struct AtNorm {
    double mu;
};
struct FullPath {};
using HomotopyStop = std::variant<AtLambda, AtResidual, AtNorm, FullPath>;

struct HomotopyOptions {
    double ridge = 0.0;        // opt-in elastic-net perturbation restoring uniqueness
    double kkt_tol = 1e-8;     // self-check tolerance (checked by tests, not here)
    index_t max_kinks = 0;     // 0 = 10 * (m + p)
};

/// Homotopy / regularization-path solver for the Lasso. Follows the path
/// from lambda = ||D^T x||_inf downwards, recording a kink at every
/// support change, until the requested stop or lambda = 0.
inline RegPath homotopy(const std::vector<double>& x, const Dictionary& D,
                        const HomotopyStop& stop, const HomotopyOptions& hopt = {},
                        const GramCache* cache = nullptr) {
    const index_t m = D.dim(), p = D.size();
    if (x.size() != m) throw std::invalid_argument("homotopy: dimension mismatch");
    const double ridge = hopt.ridge;
    const index_t max_kinks = hopt.max_kinks ? hopt.max_kinks : 10 * (m + p);

    auto gram = [&](index_t i, index_t j) -> double {
        const double q = cache ? cache->Q(i, j) : dot(D.atom(i), D.atom(j), m);
        return i == j ? q + ridge : q;
    };

    std::vector<double> c0(p);  // D^T x
    matvec_t(D.atoms, x, c0);
    double lambda = norm_inf(c0);

    RegPath path;
    path.kinks.emplace_back(lambda, SparseCode(p));
    if (lambda == 0.0) return path;

    // stop targets
    const auto* at_lambda = std::get_if<AtLambda>(&stop);
    const auto* at_res = std::get_if<AtResidual>(&stop);
    const auto* at_norm = std::get_if<AtNorm>(&stop);
    if (at_res && norm2_sq(x) <= at_res->eps) return path;  // alpha = 0 already feasible
    if (at_norm && at_norm->mu == 0.0) return path;
    if (at_lambda && at_lambda->lambda >= lambda) return path;

    std::vector<index_t> support;
    std::vector<double> eta_sign;
    CholFactor chol;
    std::vector<char> active(p, 0);

    auto activate = [&](index_t j, double sgn) {
        std::vector<double> g(support.size());
        for (index_t t = 0; t < support.size(); ++t) g[t] = gram(support[t], j);
        if (!chol.append(g, gram(j, j)))
            throw DegeneratePathError("homotopy: rank-deficient active set at atom " +
                                      std::to_string(j));
        support.push_back(j);
        eta_sign.push_back(sgn);
        active[j] = 1;
    };

    // initial active set: all argmax correlations
    for (index_t j = 0; j < p; ++j)
        if (std::fabs(c0[j]) >= lambda * (1.0 - 1e-12))
            activate(j, c0[j] > 0 ? 1.0 : -1.0);

    auto record = [&](double lam, const std::vector<double>& v,
                      const std::vector<double>& u) {
        SparseCode code(p);
        std::vector<std::pair<index_t, double>> entries;
        for (index_t t = 0; t < support.size(); ++t) {
            double val = v[t] - lam * u[t];
            // an atom leaving at this kink evaluates to zero up to rounding;
            // snap it to an exact stored zero so the recorded support is the
            // active set of the segment ending here and the KKT test treats
            // the atom as inactive rather than active with arbitrary sign
            if (std::fabs(val) <
                1e-12 * (std::fabs(v[t]) + std::fabs(lam * u[t])))
                val = 0.0;
            entries.emplace_back(support[t], val);
        }
        std::sort(entries.begin(), entries.end());
        for (auto& [j, val] : entries) {
            code.support.push_back(j);
            code.coeffs.push_back(val);
        }
        path.kinks.emplace_back(lam, std::move(code));
    };

    for (index_t kink = 0; kink < max_kinks; ++kink) {
        const index_t na = support.size();
        // segment: alpha_Gamma(lam) = v - lam * u
        std::vector<double> v(na), u(na);
        for (index_t t = 0; t < na; ++t) {
            v[t] = dot(D.atom(support[t]), x.data(), m);
            u[t] = eta_sign[t];
        }
        chol.solve(v);
        chol.solve(u);

        // inactive correlations along segment: c_j(lam) = a_j + lam * b_j
        // with a_j = d_j^T x - g_j^T v,  b_j = g_j^T u
        double next_lambda = 0.0;
        int event_kind = -1;  // 0 = enter, 1 = leave
        index_t event_idx = p;
        double event_sign = 0.0;
        double second_best = -1.0;
        index_t second_idx = p;

        // events below rounding scale are noise, not kinks
        const double lambda_floor = 1e-12 * path.kinks.front().first;
        // the rejection band below the current lambda absorbs the spurious
        // events of freshly entered/left atoms, whose crossings recompute to
        // the current lambda up to rounding
        auto consider = [&](double lam, int kind, index_t idx, double sgn) {
            if (!(lam > lambda_floor) || lam >= lambda * (1.0 - 1e-10)) return;
            if (lam > next_lambda) {
                if (event_kind >= 0) {
                    second_best = next_lambda;
                    second_idx = event_idx;
                }
                next_lambda = lam;
                event_kind = kind;
                event_idx = idx;
                event_sign = sgn;
            } else if (lam > second_best) {
                second_best = lam;
                second_idx = idx;
            }
        };

        for (index_t j = 0; j < p; ++j) {
            if (active[j]) continue;
            double gv = 0.0, gu = 0.0;
            for (index_t t = 0; t < na; ++t) {
                const double q = gram(j, support[t]);
                gv += q * v[t];
                gu += q * u[t];
            }
            const double a = c0[j] - gv, b = gu;
            // crossing +lam: a + lam b = lam  -> lam = a / (1 - b)
            if (std::fabs(1.0 - b) > 1e-14) consider(a / (1.0 - b), 0, j, 1.0);
            // crossing -lam: a + lam b = -lam -> lam = -a / (1 + b)
            if (std::fabs(1.0 + b) > 1e-14) consider(-a / (1.0 + b), 0, j, -1.0);
        }
        for (index_t t = 0; t < na; ++t) {
            // coefficient hits zero: v_t - lam u_t = 0
            if (u[t] != 0.0) consider(v[t] / u[t], 1, t, 0.0);
        }

        // stop targets on the current segment
        auto emit_at = [&](double lam) {
            record(lam, v, u);
        };
        if (at_lambda && at_lambda->lambda >= next_lambda) {
            emit_at(at_lambda->lambda);
            return path;
        }
        if (at_res) {
            // ||r(lam)||^2 = ||r0||^2 + lam^2 ||D_G u||^2 with r0 = x - D_G v
            std::vector<double> r0(x);
            std::vector<double> Du(m, 0.0);
            for (index_t t = 0; t < na; ++t) {
                const double* d = D.atom(support[t]);
                for (index_t i = 0; i < m; ++i) {
                    r0[i] -= v[t] * d[i];
                    Du[i] += u[t] * d[i];
                }
            }
            const double base = norm2_sq(r0), quad = norm2_sq(Du);
            // decreasing lam shrinks ||r||; crossing eps at lam* on this segment?
            if (quad > 0.0) {
                const double lam_sq = (at_res->eps - base) / quad;
                if (lam_sq >= 0.0) {
                    const double lam_star = std::sqrt(lam_sq);
                    if (lam_star >= next_lambda && lam_star <= lambda) {
                        emit_at(lam_star);
                        return path;
                    }
                }
            } else if (base <= at_res->eps) {
                emit_at(next_lambda);
                return path;
            }
        }
        if (at_norm) {
            // ||alpha(lam)||_1 = eta^T v - lam eta^T u, linear and increasing as lam drops
            double ev = 0.0, eu = 0.0;
            for (index_t t = 0; t < na; ++t) {
                ev += eta_sign[t] * v[t];
                eu += eta_sign[t] * u[t];
            }
            if (eu != 0.0) {
                const double lam_star = (ev - at_norm->mu) / eu;
                if (lam_star >= next_lambda && lam_star < lambda) {
                    emit_at(lam_star);
                    return path;
                }
            }
        }

        if (event_kind < 0) {
            // no further events: path ends at lambda = 0 on this segment
            emit_at(0.0);
            return path;
        }

        // a genuine tie between the two best events makes the next active set
        // ambiguous; surface it instead of guessing (checked only once the
        // event is actually reached, after the stop targets above)
        if (second_best >= 0.0 && next_lambda - second_best < 1e-12) {
            throw DegeneratePathError(
                "homotopy: events for indices " + std::to_string(event_idx) + " and " +
                std::to_string(second_idx) + " coincide within 1e-12 at lambda = " +
                std::to_string(next_lambda));
        }

        record(next_lambda, v, u);
        lambda = next_lambda;
        if (event_kind == 0) {
            activate(event_idx, event_sign);
        } else {
            const index_t t = event_idx;
            active[support[t]] = 0;
            support.erase(support.begin() + static_cast<std::ptrdiff_t>(t));
            eta_sign.erase(eta_sign.begin() + static_cast<std::ptrdiff_t>(t));
            chol.remove(t);
        }
        if (support.empty()) return path;
    }
    throw DegeneratePathError("homotopy: kink budget exhausted");
}

/// Final code of a homotopy run (the path's last kink).
inline SparseCode homotopy_solve(const std::vector<double>& x, const Dictionary& D,
                                 const HomotopyStop& stop,
                                 const HomotopyOptions& hopt = {},
                                 const GramCache* cache = nullptr) {
    auto path = homotopy(x, D, stop, hopt, cache);
    return path.kinks.back().second;
}

/// Penalized lasso encode via homotopy with a coordinate-descent fallback
/// when the path is degenerate (tied events, e.g. near-duplicate atoms).
inline SparseCode lasso_encode_robust(const std::vector<double>& x, const Dictionary& D,
                                      double lambda, const HomotopyOptions& hopt = {},
                                      const GramCache* cache = nullptr) {
    try {
        return homotopy_solve(x, D, AtLambda{lambda}, hopt, cache);
    } catch (const DegeneratePathError&) {
        SolverOptions opts;
        opts.max_iter = 2000;
        opts.tol = 1e-10;
        return cd_lasso(x, D, lambda, opts, SparseCode(D.size()), {}, CdOrder::Cyclic,
                        cache);
    }
}

enum class Method { CD, ISTA, FISTA, Homotopy };

/// Dispatch between solvers; residual- and norm-constrained forms route to
/// the homotopy stops.
inline SparseCode solve(const LassoProblem& prob, Method method,
                        const SolverOptions& opts) {
    const Dictionary& D = *prob.D;
    SparseCode zero(D.size());
    if (const auto* pen = std::get_if<Penalized>(&prob.form)) {
        switch (method) {
            case Method::CD:
                return cd_lasso(prob.x, D, pen->lambda, opts, zero);
            case Method::ISTA: {
                SolverOptions o = opts;
                o.accelerate = false;
                return prox_grad(prob, o, zero);
            }
            case Method::FISTA: {
                SolverOptions o = opts;
                o.accelerate = true;
                return prox_grad(prob, o, zero);
            }
            case Method::Homotopy:
                return homotopy_solve(prob.x, D, AtLambda{pen->lambda});
        }
    } else if (const auto* rc = std::get_if<ResidualConstrained>(&prob.form)) {
        if (method != Method::Homotopy)
            throw std::invalid_argument("solve: residual-constrained form requires homotopy");
        return homotopy_solve(prob.x, D, AtResidual{rc->eps});
    } else {
        const auto& nc = std::get<NormConstrained>(prob.form);
        switch (method) {
            case Method::ISTA:
            case Method::FISTA: {
                SolverOptions o = opts;
                o.accelerate = method == Method::FISTA;
                return prox_grad(prob, o, zero);
            }
            case Method::Homotopy:
                return homotopy_solve(prob.x, D, AtNorm{nc.mu});
            default:
                throw std::invalid_argument("solve: unsupported (method, form) pairing");
        }
    }
    throw std::invalid_argument("solve: unsupported (method, form) pairing");
}

}  // namespace sparsekit
