#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "sparsekit/rng.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

/// Scale every column of M onto the unit l2 ball: d <- d / max(||d||, 1).
inline Dictionary project_unit_columns(DenseMatrix M) {
    if (!M.finite()) throw std::invalid_argument("project_unit_columns: non-finite input");
    for (index_t j = 0; j < M.cols; ++j) {
        double* c = M.col(j);
        const double nrm = norm2(c, M.rows);
        if (nrm > 1.0) {
            const double inv = 1.0 / nrm;
            for (index_t i = 0; i < M.rows; ++i) c[i] *= inv;
        }
    }
    return Dictionary(std::move(M));
}

struct TopK {
    index_t k;
};
struct Level {
    double mu;  // >= 0
};
using HardThresholdMode = std::variant<TopK, Level>;

/// Hard thresholding: TopK keeps the k largest magnitudes (ties to the lowest
/// index), Level zeroes entries with |b| < mu. Kept entries are untouched.
inline std::vector<double> hard_threshold(const std::vector<double>& beta,
                                          const HardThresholdMode& mode) {
    std::vector<double> out(beta.size(), 0.0);
    if (const auto* tk = std::get_if<TopK>(&mode)) {
        if (tk->k > beta.size())
            throw std::invalid_argument("hard_threshold: k exceeds dimension");
        std::vector<index_t> idx(beta.size());
        std::iota(idx.begin(), idx.end(), index_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](index_t a, index_t b) {
            return std::fabs(beta[a]) > std::fabs(beta[b]);
        });
        for (index_t r = 0; r < tk->k; ++r) out[idx[r]] = beta[idx[r]];
    } else {
        const double mu = std::get<Level>(mode).mu;
        if (mu < 0.0) throw std::invalid_argument("hard_threshold: mu < 0");
        for (index_t i = 0; i < beta.size(); ++i)
            if (std::fabs(beta[i]) >= mu) out[i] = beta[i];
    }
    return out;
}

inline double soft_threshold_scalar(double v, double lambda) {
    if (v > lambda) return v - lambda;
    if (v < -lambda) return v + lambda;
    return 0.0;
}

inline std::vector<double> soft_threshold(const std::vector<double>& beta, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("soft_threshold: lambda < 0");
    std::vector<double> out(beta.size());
    for (index_t i = 0; i < beta.size(); ++i)
        out[i] = soft_threshold_scalar(beta[i], lambda);
    return out;
}

/// Group thresholding: each group is scaled by (1 - lambda/||b_g||)_+ .
inline std::vector<double> group_threshold(const std::vector<double>& beta,
                                           const GroupStructure& G, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("group_threshold: lambda < 0");
    G.validate(beta.size());
    std::vector<double> out(beta.size(), 0.0);
    for (const auto& g : G.groups) {
        double nrm = 0.0;
        for (index_t i : g) nrm += beta[i] * beta[i];
        nrm = std::sqrt(nrm);
        if (nrm > lambda && nrm > 0.0) {
            const double scale = 1.0 - lambda / nrm;
            for (index_t i : g) out[i] = scale * beta[i];
        }
    }
    return out;
}

namespace detail {

/// Expected-linear-time threshold search for the l1-ball projection,
/// randomized-pivot selection over the magnitude vector. Finds theta with
/// sum_i max(mags[i] - theta, 0) == mu, assuming sum(mags) > mu.
inline double l1_projection_threshold(std::vector<double> mags, double mu) {
    const std::vector<double> original = mags;
    Rng rng(0x5eed1u);
    double above_sum = 0.0;  // sum of elements known to exceed theta
    index_t above_cnt = 0;
    index_t lo = 0, hi = mags.size();
    while (hi > lo) {
        const index_t pi = lo + static_cast<index_t>(rng.integer(hi - lo));
        const double pivot = mags[pi];
        // partition window: [lo, ge) >= pivot, [ge, hi) < pivot
        index_t ge = lo;
        double sum_ge = 0.0;
        for (index_t i = lo; i < hi; ++i) {
            if (mags[i] >= pivot) {
                std::swap(mags[i], mags[ge]);
                sum_ge += mags[ge];
                ++ge;
            }
        }
        const double f_pivot =
            (above_sum + sum_ge) - static_cast<double>(above_cnt + ge - lo) * pivot;
        if (f_pivot < mu) {
            // theta < pivot: the >= side lies strictly above theta
            above_sum += sum_ge;
            above_cnt += ge - lo;
            lo = ge;
        } else {
            // theta >= pivot: the < side is inert, and so are pivot-valued
            // entries (they contribute max(pivot - theta, 0) = 0)
            index_t gt = lo;
            for (index_t i = lo; i < ge; ++i) {
                if (mags[i] > pivot) std::swap(mags[i], mags[gt++]);
            }
            hi = gt;
        }
    }
    // the partition loop fixed the active count; recompute the sum over the
    // top magnitudes in descending order so the threshold is independent of
    // the pivot sequence (bitwise-reproducible, matches a sorted evaluation)
    std::vector<double> top = original;
    std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(above_cnt - 1),
                     top.end(), std::greater<>());
    std::sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(above_cnt),
              std::greater<>());
    double sum = 0.0;
    for (index_t i = 0; i < above_cnt; ++i) sum += top[i];
    return (sum - mu) / static_cast<double>(above_cnt);
}

}  // namespace detail

/// Euclidean projection onto the l1 ball of radius mu.
inline std::vector<double> project_l1_ball(const std::vector<double>& beta, double mu) {
    if (mu <= 0.0) throw std::invalid_argument("project_l1_ball: mu <= 0");
    if (norm1(beta) <= mu) return beta;
    std::vector<double> mags(beta.size());
    for (index_t i = 0; i < beta.size(); ++i) mags[i] = std::fabs(beta[i]);
    const double theta = detail::l1_projection_threshold(std::move(mags), mu);
    return soft_threshold(beta, theta);
}

/// Penalty value psi(alpha) for every supported penalty tag.
inline double penalty_eval(const Penalty& psi, const SparseCode& alpha) {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PenaltyL0>) {
                double n = 0.0;
                for (double c : alpha.coeffs)
                    if (c != 0.0) n += 1.0;
                return n;
            } else if constexpr (std::is_same_v<T, PenaltyL1>) {
                return norm1(alpha.coeffs);
            } else if constexpr (std::is_same_v<T, PenaltyElasticNet>) {
                return norm1(alpha.coeffs) + 0.5 * p.gamma * norm2_sq(alpha.coeffs);
            } else if constexpr (std::is_same_v<T, PenaltyLq>) {
                double s = 0.0;
                for (double c : alpha.coeffs) s += std::pow(std::fabs(c), p.q);
                return s;
            } else if constexpr (std::is_same_v<T, PenaltyWeightedL1>) {
                double s = 0.0;
                for (index_t k = 0; k < alpha.support.size(); ++k)
                    s += p.weights[alpha.support[k]] * std::fabs(alpha.coeffs[k]);
                return s;
            } else {  // PenaltyGroupL2
                const auto dense = alpha.to_dense();
                double s = 0.0;
                for (const auto& g : p.groups.groups) {
                    double nrm = 0.0;
                    for (index_t i : g) nrm += dense[i] * dense[i];
                    s += std::sqrt(nrm);
                }
                return s;
            }
        },
        psi);
}

constexpr double kKktDefaultTol = 1e-6;

/// Optimality check for 1/2||x - D a||^2 (+ gamma/2 ||a||^2) + lambda ||a||_1.
inline KktReport lasso_kkt_check(const std::vector<double>& x, const Dictionary& D,
                                 const SparseCode& alpha, double lambda,
                                 double elastic_gamma = 0.0,
                                 double tol = kKktDefaultTol) {
    if (x.size() != D.dim() || alpha.dim != D.size())
        throw std::invalid_argument("lasso_kkt_check: dimension mismatch");
    const auto dense = alpha.to_dense();
    std::vector<double> residual(x);
    for (index_t k = 0; k < alpha.support.size(); ++k) {
        const double* a = D.atom(alpha.support[k]);
        const double c = alpha.coeffs[k];
        for (index_t i = 0; i < residual.size(); ++i) residual[i] -= c * a[i];
    }
    KktReport rep;
    for (index_t j = 0; j < D.size(); ++j) {
        const double grad = -dot(D.atom(j), residual.data(), D.dim()) +
                            elastic_gamma * dense[j];
        if (dense[j] != 0.0) {
            const double sgn = dense[j] > 0.0 ? 1.0 : -1.0;
            rep.max_violation_active =
                std::max(rep.max_violation_active, std::fabs(grad + lambda * sgn));
        } else {
            rep.max_violation_inactive =
                std::max(rep.max_violation_inactive, std::max(0.0, std::fabs(grad) - lambda));
        }
    }
    rep.passed = rep.max_violation_active <= tol && rep.max_violation_inactive <= tol;
    return rep;
}

/// PSNR in dB for intensities on the [0,255] scale; +inf for identical inputs.
inline double psnr(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (index_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace sparsekit
