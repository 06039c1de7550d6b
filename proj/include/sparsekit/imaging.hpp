#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sparsekit/core.hpp"
#include "sparsekit/dictlearn.hpp"
#include "sparsekit/greedy.hpp"
#include "sparsekit/parallel.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

/// Planar float image on a nominal [0,255] scale (values are not clamped
/// internally; clamping happens only on 8-bit export).
struct Image {
    index_t width = 0;
    index_t height = 0;
    index_t channels = 1;
    std::vector<double> values;  // channel planes, each row-major

    Image() = default;
    Image(index_t w, index_t h, index_t c = 1)
        : width(w), height(h), channels(c),
          values(static_cast<std::size_t>(w) * h * c, 0.0) {
        if (c != 1 && c != 3)
            throw std::invalid_argument("Image: channel count must be 1 or 3");
    }

    double& at(index_t x, index_t y, index_t c = 0) {
        return values[(c * height + y) * width + x];
    }
    double at(index_t x, index_t y, index_t c = 0) const {
        return values[(c * height + y) * width + x];
    }
    index_t pixels() const { return width * height; }
};

/// Stride grid of fully in-bounds patch origins; the last row/column of
/// origins is clamped so every pixel is covered.
struct PatchGrid {
    index_t width = 0, height = 0, channels = 1;
    index_t patch_side = 0;
    index_t stride = 1;
    std::vector<std::pair<index_t, index_t>> origins;  // (x, y)
    std::vector<index_t> counts;                       // per pixel, row-major

    PatchGrid() = default;
    PatchGrid(index_t w, index_t h, index_t e, index_t s, index_t c = 1)
        : width(w), height(h), channels(c), patch_side(e), stride(s) {
        if (e == 0 || s == 0 || e > w || e > h)
            throw std::invalid_argument("PatchGrid: patch does not fit image");
        auto axis = [&](index_t dim) {
            std::vector<index_t> pos;
            for (index_t o = 0;; o += s) {
                if (o + e >= dim) {
                    pos.push_back(dim - e);  // clamp so coverage reaches the border
                    break;
                }
                pos.push_back(o);
            }
            return pos;
        };
        const auto xs = axis(w), ys = axis(h);
        origins.reserve(xs.size() * ys.size());
        counts.assign(static_cast<std::size_t>(w) * h, 0);
        for (index_t y : ys)
            for (index_t x : xs) {
                origins.emplace_back(x, y);
                for (index_t dy = 0; dy < e; ++dy)
                    for (index_t dx = 0; dx < e; ++dx)
                        ++counts[(y + dy) * w + (x + dx)];
            }
    }

    index_t patch_dim() const { return channels * patch_side * patch_side; }
    index_t size() const { return origins.size(); }
};

/// Per-pixel observed flags aligned with an Image.
struct Mask {
    index_t width = 0, height = 0;
    std::vector<char> observed;  // row-major, one flag per pixel (all channels)

    Mask() = default;
    Mask(index_t w, index_t h, bool value = true)
        : width(w), height(h),
          observed(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

    bool at(index_t x, index_t y) const { return observed[y * width + x] != 0; }
    void set(index_t x, index_t y, bool v) { observed[y * width + x] = v ? 1 : 0; }
};

inline void check_grid(const Image& img, const PatchGrid& grid) {
    if (img.width != grid.width || img.height != grid.height ||
        img.channels != grid.channels)
        throw std::invalid_argument("patch grid does not match image shape");
}

/// Column k = row-major pixels of patch k, channel planes concatenated.
inline DenseMatrix extract_patches(const Image& img, const PatchGrid& grid) {
    check_grid(img, grid);
    const index_t e = grid.patch_side;
    DenseMatrix P(grid.patch_dim(), grid.size());
    for (index_t k = 0; k < grid.size(); ++k) {
        auto [ox, oy] = grid.origins[k];
        double* col = P.col(k);
        index_t t = 0;
        for (index_t c = 0; c < img.channels; ++c)
            for (index_t dy = 0; dy < e; ++dy)
                for (index_t dx = 0; dx < e; ++dx)
                    col[t++] = img.at(ox + dx, oy + dy, c);
    }
    return P;
}

/// Count-free adjoint of extract_patches: scatter-add every patch estimate.
inline Image scatter_patches(const DenseMatrix& P, const PatchGrid& grid) {
    const index_t e = grid.patch_side;
    if (P.rows != grid.patch_dim() || P.cols != grid.size())
        throw std::invalid_argument("scatter_patches: shape mismatch");
    Image img(grid.width, grid.height, grid.channels);
    for (index_t k = 0; k < grid.size(); ++k) {
        auto [ox, oy] = grid.origins[k];
        const double* col = P.col(k);
        index_t t = 0;
        for (index_t c = 0; c < grid.channels; ++c)
            for (index_t dy = 0; dy < e; ++dy)
                for (index_t dx = 0; dx < e; ++dx)
                    img.at(ox + dx, oy + dy, c) += col[t++];
    }
    return img;
}

/// Average overlapping estimates with the true per-pixel overlap counts.
inline Image recombine_average(const DenseMatrix& P, const PatchGrid& grid) {
    Image img = scatter_patches(P, grid);
    for (index_t y = 0; y < grid.height; ++y)
        for (index_t x = 0; x < grid.width; ++x) {
            const index_t cnt = grid.counts[y * grid.width + x];
            if (cnt == 0)
                throw std::invalid_argument("recombine_average: uncovered pixel");
            for (index_t c = 0; c < grid.channels; ++c)
                img.at(x, y, c) /= static_cast<double>(cnt);
        }
    return img;
}

/// Remove the per-column mean (one mean per channel block for RGB patches).
/// Returns the means as a channels x n matrix for later re-addition.
inline std::pair<DenseMatrix, DenseMatrix> center_patches(const DenseMatrix& P,
                                                          index_t channels = 1) {
    if (channels == 0 || P.rows % channels != 0)
        throw std::invalid_argument("center_patches: bad channel count");
    const index_t block = P.rows / channels;
    DenseMatrix C = P;
    DenseMatrix means(channels, P.cols);
    for (index_t k = 0; k < P.cols; ++k) {
        double* col = C.col(k);
        for (index_t c = 0; c < channels; ++c) {
            double mu = 0.0;
            for (index_t i = 0; i < block; ++i) mu += col[c * block + i];
            mu /= static_cast<double>(block);
            means(c, k) = mu;
            for (index_t i = 0; i < block; ++i) col[c * block + i] -= mu;
        }
    }
    return {std::move(C), std::move(means)};
}

inline void add_means(DenseMatrix& P, const DenseMatrix& means) {
    if (means.cols != P.cols || means.rows == 0 || P.rows % means.rows != 0)
        throw std::invalid_argument("add_means: shape mismatch");
    const index_t block = P.rows / means.rows;
    for (index_t k = 0; k < P.cols; ++k) {
        double* col = P.col(k);
        for (index_t c = 0; c < means.rows; ++c)
            for (index_t i = 0; i < block; ++i) col[c * block + i] += means(c, k);
    }
}

/// Divide each column by max(||col||, eta) with eta = eta_factor * mean norm.
inline DenseMatrix contrast_normalize(const DenseMatrix& P, double eta_factor) {
    if (eta_factor <= 0.0)
        throw std::invalid_argument("contrast_normalize: eta_factor must be > 0");
    std::vector<double> norms(P.cols);
    double mean_norm = 0.0;
    for (index_t k = 0; k < P.cols; ++k) {
        norms[k] = norm2(P.col(k), P.rows);
        mean_norm += norms[k];
    }
    mean_norm /= static_cast<double>(std::max<index_t>(P.cols, 1));
    const double eta = eta_factor * mean_norm;
    DenseMatrix out = P;
    for (index_t k = 0; k < P.cols; ++k) {
        const double div = std::max(norms[k], eta);
        if (div > 0.0) {
            double* col = out.col(k);
            for (index_t i = 0; i < P.rows; ++i) col[i] /= div;
        }
    }
    return out;
}

namespace detail {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: A = V diag(w) V^T.
/// Eigenpairs are returned sorted by decreasing eigenvalue.
inline void jacobi_eigen(DenseMatrix A, DenseMatrix& V, std::vector<double>& w) {
    const index_t n = A.rows;
    if (A.cols != n) throw std::invalid_argument("jacobi_eigen: not square");
    V = DenseMatrix(n, n);
    for (index_t i = 0; i < n; ++i) V(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (index_t j = 0; j < n; ++j)
            for (index_t i = 0; i < j; ++i) off += A(i, j) * A(i, j);
        if (off <= 1e-28 * static_cast<double>(n * n)) break;
        for (index_t q = 1; q < n; ++q)
            for (index_t p = 0; p < q; ++p) {
                const double apq = A(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (index_t i = 0; i < n; ++i) {
                    const double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = c * aip - s * aiq;
                    A(i, q) = s * aip + c * aiq;
                }
                for (index_t i = 0; i < n; ++i) {
                    const double api = A(p, i), aqi = A(q, i);
                    A(p, i) = c * api - s * aqi;
                    A(q, i) = s * api + c * aqi;
                }
                for (index_t i = 0; i < n; ++i) {
                    const double vip = V(i, p), viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
    }
    w.resize(n);
    for (index_t i = 0; i < n; ++i) w[i] = A(i, i);
    // sort eigenpairs by decreasing eigenvalue
    std::vector<index_t> order(n);
    for (index_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](index_t a, index_t b) { return w[a] > w[b]; });
    DenseMatrix Vs(n, n);
    std::vector<double> ws(n);
    for (index_t k = 0; k < n; ++k) {
        ws[k] = w[order[k]];
        std::copy(V.col(order[k]), V.col(order[k]) + n, Vs.col(k));
    }
    V = std::move(Vs);
    w = std::move(ws);
}

}  // namespace detail

/// Whitening transform x <- U S^dagger U^T x fit on centered patches.
struct WhitenModel {
    DenseMatrix U;                  // m x m orthogonal
    std::vector<double> s;          // singular values, decreasing
    std::vector<double> s_dagger;   // 1/s where kept, else 0
    double variance_kept = 1.0;
    index_t kept = 0;
};

inline WhitenModel whiten_fit(const DenseMatrix& P, double variance_keep = 1.0) {
    const index_t m = P.rows, n = P.cols;
    if (n < 2) throw std::invalid_argument("whiten_fit: need at least 2 samples");
    if (variance_keep <= 0.0 || variance_keep > 1.0)
        throw std::invalid_argument("whiten_fit: variance_keep in (0,1]");
    DenseMatrix C(m, m);
    for (index_t k = 0; k < n; ++k) {
        const double* col = P.col(k);
        for (index_t j = 0; j < m; ++j)
            for (index_t i = 0; i <= j; ++i) C(i, j) += col[i] * col[j];
    }
    for (index_t j = 0; j < m; ++j)
        for (index_t i = 0; i <= j; ++i) {
            C(i, j) /= static_cast<double>(n);
            C(j, i) = C(i, j);
        }
    WhitenModel model;
    std::vector<double> lam;
    detail::jacobi_eigen(std::move(C), model.U, lam);
    double total = 0.0;
    for (double& l : lam) {
        if (l < 0.0) l = 0.0;  // round-off
        total += l;
    }
    model.s.resize(m);
    for (index_t i = 0; i < m; ++i) model.s[i] = std::sqrt(lam[i]);
    // minimal k with the leading eigenvalue mass >= variance_keep * total
    index_t kept = 0;
    double run = 0.0;
    const double eps = 1e-12 * (m > 0 ? model.s[0] : 0.0);
    for (index_t i = 0; i < m; ++i) {
        if (run >= variance_keep * total && total > 0.0) break;
        if (model.s[i] <= eps) break;
        run += lam[i];
        kept = i + 1;
    }
    model.kept = kept;
    model.variance_kept = total > 0.0 ? run / total : 1.0;
    model.s_dagger.assign(m, 0.0);
    for (index_t i = 0; i < kept; ++i)
        if (model.s[i] > eps) model.s_dagger[i] = 1.0 / model.s[i];
    return model;
}

inline DenseMatrix whiten_apply(const WhitenModel& model, const DenseMatrix& P) {
    const index_t m = P.rows;
    if (model.U.rows != m)
        throw std::invalid_argument("whiten_apply: dimension mismatch");
    DenseMatrix out(m, P.cols);
    std::vector<double> t(m);
    for (index_t k = 0; k < P.cols; ++k) {
        const double* col = P.col(k);
        for (index_t j = 0; j < m; ++j)
            t[j] = model.s_dagger[j] * dot(model.U.col(j), col, m);
        double* o = out.col(k);
        for (index_t i = 0; i < m; ++i) {
            double v = 0.0;
            for (index_t j = 0; j < m; ++j) v += model.U(i, j) * t[j];
            o[i] = v;
        }
    }
    return out;
}

namespace detail {

/// Regularized lower incomplete gamma P(a, x): series for x < a+1,
/// continued fraction for the complement otherwise.
inline double gammp(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammp: bad arguments");
    if (x == 0.0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Lentz continued fraction for Q(a,x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - gln) * h;
    return 1.0 - q;
}

}  // namespace detail

/// CDF of the chi-square distribution with dof degrees of freedom.
inline double chi2_cdf(double x, double dof) {
    if (x <= 0.0) return 0.0;
    return detail::gammp(dof / 2.0, x / 2.0);
}

/// Inverse chi-square CDF by bisection on the regularized incomplete gamma.
inline double chi2_quantile(double tau, double dof) {
    if (tau <= 0.0 || tau >= 1.0)
        throw std::invalid_argument("chi2_quantile: tau in (0,1)");
    double lo = 0.0, hi = dof;
    while (chi2_cdf(hi, dof) < tau) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, dof) < tau)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-10 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

struct Fixed115 {};
struct ChiSquare {
    double tau = 0.9;
};

/// Noise level plus the residual-threshold rule deriving epsilon from it.
struct NoiseModel {
    double sigma = 0.0;
    std::variant<Fixed115, ChiSquare> rule = Fixed115{};

    double epsilon(index_t m) const {
        if (std::holds_alternative<Fixed115>(rule)) {
            const double t = 1.15 * sigma;
            return static_cast<double>(m) * t * t;
        }
        const double tau = std::get<ChiSquare>(rule).tau;
        if (tau <= 0.0 || tau >= 1.0)
            throw std::invalid_argument("NoiseModel: tau in (0,1)");
        return sigma * sigma * chi2_quantile(tau, static_cast<double>(m));
    }
};

/// Overcomplete DCT dictionary: outer products of q = ceil(sqrt(p)) sampled
/// cosines per axis, mean-removed except the first atom, l2-normalized.
inline Dictionary build_dct_dictionary(index_t e, index_t p) {
    if (e == 0 || p == 0) throw std::invalid_argument("build_dct_dictionary: empty");
    index_t q = static_cast<index_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    DenseMatrix waves(e, q);
    for (index_t j = 0; j < q; ++j)
        for (index_t i = 0; i < e; ++i)
            waves(i, j) = std::cos(M_PI * static_cast<double>(j) *
                                   (static_cast<double>(i) + 0.5) /
                                   static_cast<double>(q));
    DenseMatrix atoms(e * e, p);
    index_t k = 0;
    for (index_t a = 0; a < q && k < p; ++a)
        for (index_t b = 0; b < q && k < p; ++b, ++k) {
            double* col = atoms.col(k);
            for (index_t y = 0; y < e; ++y)
                for (index_t x = 0; x < e; ++x)
                    col[y * e + x] = waves(y, a) * waves(x, b);
            if (k > 0) {
                double mu = 0.0;
                for (index_t i = 0; i < e * e; ++i) mu += col[i];
                mu /= static_cast<double>(e * e);
                for (index_t i = 0; i < e * e; ++i) col[i] -= mu;
            }
            const double nrm = norm2(col, e * e);
            for (index_t i = 0; i < e * e; ++i) col[i] /= nrm;
        }
    return Dictionary(std::move(atoms));
}

/// Additive i.i.d. Gaussian noise; values are left unclamped internally.
inline Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
    Image out = img;
    if (sigma == 0.0) return out;
    Rng rng(seed);
    for (double& v : out.values) v += sigma * rng.gaussian();
    return out;
}

inline double image_psnr(const Image& a, const Image& b) {
    if (a.values.size() != b.values.size())
        throw std::invalid_argument("image_psnr: shape mismatch");
    return psnr(a.values, b.values);
}

enum class DenoiseScenario { DCT, GlobalDict, AdaptiveL0, AdaptiveL1 };

struct DenoiseParams {
    index_t patch_side = 0;          // 0 = pick by sigma (8 for sigma<=25, else 12)
    index_t dict_size = 256;
    index_t learn_iters = 10;        // adaptive scenarios
    double learn_lambda = 0.0;       // 0 = heuristic for AdaptiveL1 training
    double recon_lambda = 0.0;       // >0 switches reconstruction to l1 encoding
    index_t max_train_patches = 200000;
    index_t max_nnz = 0;             // 0 = m/2 cap on OMP support size
    std::uint64_t seed = 0;
    unsigned threads = 1;
    const Image* reference = nullptr;
};

struct DenoiseReport {
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double epsilon = 0.0;
    index_t patch_side = 0;
    index_t patches = 0;
    index_t trained_patches = 0;
};

namespace detail {

/// Uniform subsample of at most cap columns, seeded.
inline DenseMatrix subsample_columns(const DenseMatrix& P, index_t cap,
                                     std::uint64_t seed) {
    if (P.cols <= cap) return P;
    Rng rng(seed);
    std::vector<index_t> perm(P.cols);
    for (index_t i = 0; i < P.cols; ++i) perm[i] = i;
    for (index_t i = P.cols; i-- > 1;)
        std::swap(perm[i], perm[static_cast<index_t>(rng.integer(i + 1))]);
    DenseMatrix out(P.rows, cap);
    for (index_t k = 0; k < cap; ++k)
        std::copy(P.col(perm[k]), P.col(perm[k]) + P.rows, out.col(k));
    return out;
}

}  // namespace detail

/// Patch-based denoising: stride-1 extraction, per-patch centering, sparse
/// approximation with the residual matched to the noise level, averaging of
/// the overlapping estimates. Adaptive scenarios first learn the dictionary
/// on (a subsample of) the noisy patches, warm-started from the provided
/// global dictionary or from DCT.
inline std::pair<Image, DenoiseReport> denoise(const Image& img,
                                               const NoiseModel& noise,
                                               DenoiseScenario scenario,
                                               const DenoiseParams& params = {},
                                               const Dictionary* global = nullptr) {
    if (noise.sigma <= 0.0)
        throw std::invalid_argument("denoise: sigma must be positive");
    if (scenario == DenoiseScenario::GlobalDict && global == nullptr)
        throw std::invalid_argument("denoise: GlobalDict scenario needs a dictionary");
    const index_t e =
        params.patch_side > 0 ? params.patch_side : (noise.sigma <= 25.0 ? 8 : 12);
    PatchGrid grid(img.width, img.height, e, 1, img.channels);
    DenseMatrix P = extract_patches(img, grid);
    auto [centered, means] = center_patches(P, img.channels);
    const index_t m = centered.rows;

    const bool adaptive = scenario == DenoiseScenario::AdaptiveL0 ||
                          scenario == DenoiseScenario::AdaptiveL1;
    Dictionary D = (scenario == DenoiseScenario::GlobalDict || (adaptive && global))
                       ? *global
                       : build_dct_dictionary(e, params.dict_size);
    DenoiseReport report;
    report.patch_side = e;
    report.patches = grid.size();
    report.epsilon = noise.epsilon(m);

    if (adaptive) {
        DenseMatrix train =
            detail::subsample_columns(centered, params.max_train_patches, params.seed);
        report.trained_patches = train.cols;
        LearnConfig cfg;
        cfg.p = D.size();
        cfg.outer_iters = params.learn_iters;
        cfg.rng_seed = params.seed;
        cfg.init = InitGiven{D};
        cfg.threads = params.threads;
        if (scenario == DenoiseScenario::AdaptiveL0) {
            cfg.k = std::max<index_t>(m / 16, 2);
            cfg.eps = report.epsilon;
            D = dl_ksvd(train, cfg).D;
        } else {
            cfg.lambda = params.learn_lambda > 0.0 ? params.learn_lambda
                                                   : 3.6 * noise.sigma;
            D = dl_alt_l1(train, cfg).D;
        }
    }

    const index_t cap = params.max_nnz > 0 ? params.max_nnz : m / 2;
    GramCache cache(D);
    DenseMatrix est(m, grid.size());
    if (params.recon_lambda > 0.0) {
        HomotopyOptions hopt;
        hopt.ridge = 1e-10;
        parallel_for(grid.size(), params.threads, [&](index_t k) {
            std::vector<double> x(centered.col(k), centered.col(k) + m);
            auto code = lasso_encode_robust(x, D, params.recon_lambda, hopt, &cache);
            std::vector<double> dense = code.to_dense();
            double* o = est.col(k);
            std::fill(o, o + m, 0.0);
            for (index_t j = 0; j < D.size(); ++j) {
                if (dense[j] == 0.0) continue;
                const double* dj = D.atom(j);
                for (index_t i = 0; i < m; ++i) o[i] += dense[j] * dj[i];
            }
        });
    } else {
        parallel_for(grid.size(), params.threads, [&](index_t k) {
            std::vector<double> x(centered.col(k), centered.col(k) + m);
            auto res = omp(x, D, BothStop{cap, report.epsilon}, &cache);
            double* o = est.col(k);
            std::fill(o, o + m, 0.0);
            for (index_t t = 0; t < res.code.support.size(); ++t) {
                const double* dj = D.atom(res.code.support[t]);
                const double c = res.code.coeffs[t];
                for (index_t i = 0; i < m; ++i) o[i] += c * dj[i];
            }
        });
    }
    add_means(est, means);
    Image out = recombine_average(est, grid);
    for (double v : out.values)
        if (!std::isfinite(v)) throw std::runtime_error("denoise: non-finite output");
    if (params.reference) report.psnr = image_psnr(*params.reference, out);
    return {std::move(out), report};
}

/// OMP restricted to the observed rows of the signal. Atoms are not assumed
/// unit-norm on the restriction; the support solve uses normal equations.
inline GreedyResult omp_masked(const std::vector<double>& x,
                               const std::vector<index_t>& rows,
                               const Dictionary& D, const StopRule& stop) {
    const index_t m = D.dim(), p = D.size();
    if (x.size() != m) throw std::invalid_argument("omp_masked: dimension mismatch");
    const index_t k = detail::stop_k(stop, std::min<index_t>(rows.size(), p));
    const double eps = detail::stop_eps(stop);
    const bool has_eps = !std::holds_alternative<MaxNonzeros>(stop);

    std::vector<double> r;
    r.reserve(rows.size());
    for (index_t i : rows) r.push_back(x[i]);
    const index_t obs = rows.size();

    std::vector<double> diag(p);
    for (index_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (index_t t = 0; t < obs; ++t) {
            const double v = D.atom(j)[rows[t]];
            s += v * v;
        }
        diag[j] = s;
    }

    GreedyResult out;
    std::vector<index_t> support;
    std::vector<char> active(p, 0);
    double rsq = norm2_sq(r);
    const index_t max_sel = std::min<index_t>({k, obs, p});
    std::vector<double> coeffs;
    while (support.size() < max_sel) {
        if (has_eps && rsq <= eps) break;
        index_t jhat = p;
        double best = 0.0;
        for (index_t j = 0; j < p; ++j) {
            if (active[j] || diag[j] <= 1e-12) continue;
            double c = 0.0;
            for (index_t t = 0; t < obs; ++t) c += D.atom(j)[rows[t]] * r[t];
            const double gain = c * c / diag[j];
            if (jhat == p || gain > best) {
                best = gain;
                jhat = j;
            }
        }
        if (jhat == p || best <= 1e-14 * std::max(rsq, 1.0)) break;
        active[jhat] = 1;
        support.push_back(jhat);
        // least squares on the support over observed rows
        const index_t s = support.size();
        DenseMatrix G(s, s);
        std::vector<double> b(s);
        for (index_t a = 0; a < s; ++a) {
            const double* da = D.atom(support[a]);
            for (index_t c = a; c < s; ++c) {
                const double* dc = D.atom(support[c]);
                double g = 0.0;
                for (index_t t = 0; t < obs; ++t) g += da[rows[t]] * dc[rows[t]];
                G(a, c) = g;
                G(c, a) = g;
            }
            double bv = 0.0;
            for (index_t t = 0; t < obs; ++t) bv += da[rows[t]] * x[rows[t]];
            b[a] = bv;
        }
        for (index_t a = 0; a < s; ++a) G(a, a) += 1e-12 * (G(a, a) + 1.0);
        coeffs = sparsekit::detail::spd_solve(G, std::move(b));
        // refresh the observed-row residual
        for (index_t t = 0; t < obs; ++t) {
            double v = x[rows[t]];
            for (index_t a = 0; a < s; ++a) v -= coeffs[a] * D.atom(support[a])[rows[t]];
            r[t] = v;
        }
        rsq = norm2_sq(r);
    }
    std::vector<double> dense(p, 0.0);
    for (index_t a = 0; a < support.size(); ++a) dense[support[a]] = coeffs[a];
    out.code = SparseCode::from_dense(dense);
    out.residual_sq = rsq;
    out.status = (has_eps && rsq > eps && support.size() == max_sel)
                     ? SolveStatus::IterationCap
                     : SolveStatus::Converged;
    return out;
}

struct InpaintParams {
    double sigma_hat = 1.0;
    index_t patch_side = 8;
    index_t stride = 1;
    index_t learn_iters = 10;   // 0 = encode with the given dictionary as-is
    index_t max_nnz = 0;        // 0 = observed/2 cap
    bool keep_observed = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct InpaintReport {
    index_t zero_observed_patches = 0;
    index_t uncovered_pixels = 0;
};

/// Fill missing pixels by learning a dictionary on the observed entries of
/// overlapping patches (masked alternate minimization), then reconstructing
/// every patch from its observed pixels and averaging the estimates.
inline Image inpaint(const Image& img, const Mask& mask, const Dictionary& D0,
                     const InpaintParams& params = {},
                     InpaintReport* report_out = nullptr) {
    if (mask.width != img.width || mask.height != img.height)
        throw std::invalid_argument("inpaint: mask/image shape mismatch");
    if (img.channels != 1)
        throw std::invalid_argument("inpaint: grayscale images only");
    const index_t e = params.patch_side;
    PatchGrid grid(img.width, img.height, e, params.stride, 1);
    DenseMatrix P = extract_patches(img, grid);
    const index_t m = P.rows, n = P.cols;
    if (D0.dim() != m) throw std::invalid_argument("inpaint: dictionary dimension");
    const index_t p = D0.size();

    // observed row sets and observed-mean centering per patch
    std::vector<std::vector<index_t>> obs_rows(n);
    std::vector<double> means(n, 0.0);
    InpaintReport report;
    for (index_t k = 0; k < n; ++k) {
        auto [ox, oy] = grid.origins[k];
        auto& rows = obs_rows[k];
        for (index_t dy = 0; dy < e; ++dy)
            for (index_t dx = 0; dx < e; ++dx)
                if (mask.at(ox + dx, oy + dy)) rows.push_back(dy * e + dx);
        if (rows.empty()) {
            ++report.zero_observed_patches;
            continue;
        }
        double mu = 0.0;
        for (index_t i : rows) mu += P(i, k);
        means[k] = mu / static_cast<double>(rows.size());
        double* col = P.col(k);
        for (index_t i = 0; i < m; ++i) col[i] -= means[k];
    }

    const double tsq = 1.15 * params.sigma_hat * 1.15 * params.sigma_hat;
    Dictionary D = D0;
    DenseMatrix A(p, n);
    auto encode_all = [&]() {
        parallel_for(n, params.threads, [&](index_t k) {
            std::fill(A.col(k), A.col(k) + p, 0.0);
            if (obs_rows[k].empty()) return;
            const double eps_k = static_cast<double>(obs_rows[k].size()) * tsq;
            const index_t cap = params.max_nnz > 0
                                    ? params.max_nnz
                                    : std::max<index_t>(obs_rows[k].size() / 2, 1);
            std::vector<double> x(P.col(k), P.col(k) + m);
            auto res = omp_masked(x, obs_rows[k], D, BothStop{cap, eps_k});
            const auto dense = res.code.to_dense();
            std::copy(dense.begin(), dense.end(), A.col(k));
        });
    };

    encode_all();
    for (index_t it = 0; it < params.learn_iters; ++it) {
        // masked residual R = M .* (P - D A), zero on unobserved rows
        DenseMatrix R(m, n);
        std::vector<char> row_obs(m);
        for (index_t k = 0; k < n; ++k) {
            std::fill(row_obs.begin(), row_obs.end(), 0);
            for (index_t i : obs_rows[k]) row_obs[i] = 1;
            const double* a = A.col(k);
            double* rc = R.col(k);
            for (index_t i = 0; i < m; ++i) rc[i] = row_obs[i] ? P(i, k) : 0.0;
            for (index_t j = 0; j < p; ++j) {
                if (a[j] == 0.0) continue;
                const double* dj = D.atom(j);
                for (index_t i = 0; i < m; ++i)
                    if (row_obs[i]) rc[i] -= a[j] * dj[i];
            }
        }
        // masked BCD over atoms: per-row weighted least squares against the
        // residual with atom j added back
        DenseMatrix atoms = D.atoms;
        std::vector<double> num(m), den(m);
        for (index_t j = 0; j < p; ++j) {
            std::fill(num.begin(), num.end(), 0.0);
            std::fill(den.begin(), den.end(), 0.0);
            const double* dj = atoms.col(j);
            for (index_t k = 0; k < n; ++k) {
                const double a = A(j, k);
                if (a == 0.0) continue;
                const double* rc = R.col(k);
                for (index_t i : obs_rows[k]) {
                    num[i] += a * (rc[i] + a * dj[i]);
                    den[i] += a * a;
                }
            }
            std::vector<double> dnew(m);
            bool changed = false;
            for (index_t i = 0; i < m; ++i) {
                dnew[i] = den[i] > 0.0 ? num[i] / den[i] : dj[i];
                if (dnew[i] != dj[i]) changed = true;
            }
            const double nrm = norm2(dnew);
            if (nrm > 1.0)
                for (double& v : dnew) v /= nrm;
            if (!changed) continue;
            // fold the atom change into the masked residual
            for (index_t k = 0; k < n; ++k) {
                const double a = A(j, k);
                if (a == 0.0) continue;
                double* rc = R.col(k);
                for (index_t i : obs_rows[k]) rc[i] += a * (dj[i] - dnew[i]);
            }
            std::copy(dnew.begin(), dnew.end(), atoms.col(j));
        }
        D = Dictionary(std::move(atoms));
        encode_all();
    }

    // reconstruct and average; zero-observed patches contribute nothing
    Image accum(img.width, img.height, 1);
    std::vector<index_t> counts(static_cast<std::size_t>(img.width) * img.height, 0);
    for (index_t k = 0; k < n; ++k) {
        if (obs_rows[k].empty()) continue;
        auto [ox, oy] = grid.origins[k];
        const double* a = A.col(k);
        std::vector<double> patch(m, means[k]);
        for (index_t j = 0; j < p; ++j) {
            if (a[j] == 0.0) continue;
            const double* dj = D.atom(j);
            for (index_t i = 0; i < m; ++i) patch[i] += a[j] * dj[i];
        }
        for (index_t dy = 0; dy < e; ++dy)
            for (index_t dx = 0; dx < e; ++dx) {
                accum.at(ox + dx, oy + dy) += patch[dy * e + dx];
                ++counts[(oy + dy) * img.width + (ox + dx)];
            }
    }
    double observed_mean = 0.0;
    index_t observed_count = 0;
    for (index_t y = 0; y < img.height; ++y)
        for (index_t x = 0; x < img.width; ++x)
            if (mask.at(x, y)) {
                observed_mean += img.at(x, y);
                ++observed_count;
            }
    if (observed_count > 0) observed_mean /= static_cast<double>(observed_count);
    Image out(img.width, img.height, 1);
    for (index_t y = 0; y < img.height; ++y)
        for (index_t x = 0; x < img.width; ++x) {
            const index_t c = counts[y * img.width + x];
            if (c > 0)
                out.at(x, y) = accum.at(x, y) / static_cast<double>(c);
            else {
                out.at(x, y) = observed_mean;
                ++report.uncovered_pixels;
            }
            if (params.keep_observed && mask.at(x, y)) out.at(x, y) = img.at(x, y);
        }
    if (report_out) *report_out = report;
    return out;
}

// ---------------------------------------------------------------------------
// Binary PGM (P5) / PPM (P6) image IO, maxval 255, float values clamped and
// rounded only here at the 8-bit boundary.

namespace detail {

inline int pnm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    return tok.empty() ? EOF : 0;
}

}  // namespace detail

inline Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    std::string tok;
    if (detail::pnm_next_token(in, tok) == EOF || (tok != "P5" && tok != "P6"))
        throw std::runtime_error("unsupported image format (need binary PGM/PPM): " + path);
    const index_t channels = tok == "P5" ? 1 : 3;
    auto read_int = [&]() {
        if (detail::pnm_next_token(in, tok) == EOF)
            throw std::runtime_error("truncated image header: " + path);
        return static_cast<index_t>(std::stoul(tok));
    };
    const index_t w = read_int(), h = read_int(), maxval = read_int();
    if (maxval != 255) throw std::runtime_error("image maxval must be 255: " + path);
    Image img(w, h, channels);
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw std::runtime_error("truncated image data: " + path);
    std::size_t t = 0;
    for (index_t y = 0; y < h; ++y)
        for (index_t x = 0; x < w; ++x)
            for (index_t c = 0; c < channels; ++c)
                img.at(x, y, c) = static_cast<double>(raw[t++]);
    return img;
}

inline void write_image(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(img.width) * img.height * img.channels);
    for (index_t y = 0; y < img.height; ++y)
        for (index_t x = 0; x < img.width; ++x)
            for (index_t c = 0; c < img.channels; ++c) {
                const double v = std::clamp(img.at(x, y, c), 0.0, 255.0);
                raw.push_back(static_cast<unsigned char>(std::lround(v)));
            }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("failed writing image: " + path);
}

}  // namespace sparsekit
