#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsekit/convex.hpp"
#include "sparsekit/core.hpp"
#include "sparsekit/types.hpp"

namespace sparsekit {

/// Ordered per-class sub-dictionaries sharing one signal dimension.
struct ClassDictSet {
    std::vector<Dictionary> dicts;  // index = class label

    explicit ClassDictSet(std::vector<Dictionary> d) : dicts(std::move(d)) {
        if (dicts.size() < 2)
            throw std::invalid_argument("ClassDictSet: need at least 2 classes");
        for (const Dictionary& dict : dicts)
            if (dict.dim() != dicts[0].dim())
                throw std::invalid_argument("ClassDictSet: inconsistent dimension");
    }

    index_t dim() const { return dicts[0].dim(); }
    index_t classes() const { return dicts.size(); }
};

struct ClassifyResult {
    index_t label = 0;
    std::vector<double> scores;  // per class; chosen label is the argmin
};

/// Default penalty for the basis-pursuit stand-in: lambda = 1e-4 ||D^T x||_inf.
inline double src_default_lambda(const std::vector<double>& x, const DenseMatrix& D) {
    std::vector<double> corr(D.cols);
    matvec_t(D, x, corr);
    return 1e-4 * norm_inf(corr);
}

/// Sparse-representation classifier: one Lasso on the concatenated (column-
/// normalized) training matrix, then argmin of per-class reconstruction error.
inline ClassifyResult src_classify(const std::vector<double>& x,
                                   const ClassDictSet& train, double lambda = 0.0) {
    const index_t m = train.dim();
    if (x.size() != m) throw std::invalid_argument("src_classify: dimension mismatch");
    index_t p_total = 0;
    for (const auto& d : train.dicts) p_total += d.size();
    DenseMatrix big(m, p_total);
    std::vector<index_t> offsets(train.classes());
    index_t off = 0;
    for (index_t c = 0; c < train.classes(); ++c) {
        offsets[c] = off;
        const Dictionary& d = train.dicts[c];
        for (index_t j = 0; j < d.size(); ++j) {
            const double nrm = norm2(d.atom(j), m);
            const double inv = nrm > 0.0 ? 1.0 / nrm : 0.0;
            for (index_t i = 0; i < m; ++i) big(i, off + j) = d.atom(j)[i] * inv;
        }
        off += d.size();
    }
    if (lambda == 0.0) lambda = src_default_lambda(x, big);
    if (lambda <= 0.0) throw std::invalid_argument("src_classify: lambda must be > 0");

    Dictionary Dbig{big};
    // small lambda makes coordinate descent crawl; the homotopy path gets
    // there exactly, with a CD fallback for degenerate (e.g. duplicated)
    // class dictionaries
    auto code = lasso_encode_robust(x, Dbig, lambda);
    const auto alpha = code.to_dense();

    ClassifyResult out;
    out.scores.resize(train.classes());
    std::vector<double> r(m);
    for (index_t c = 0; c < train.classes(); ++c) {
        std::copy(x.begin(), x.end(), r.begin());
        const index_t pc = train.dicts[c].size();
        for (index_t j = 0; j < pc; ++j) {
            const double a = alpha[offsets[c] + j];
            if (a == 0.0) continue;
            const double* col = big.col(offsets[c] + j);
            for (index_t i = 0; i < m; ++i) r[i] -= a * col[i];
        }
        out.scores[c] = norm2_sq(r);
        if (out.scores[c] < out.scores[out.label]) out.label = c;  // ties: lowest
    }
    return out;
}

/// Per-class learned-dictionary rule: classify by the smallest optimal Lasso
/// objective min_a 1/2||x - D_c a||^2 + lambda ||a||_1.
inline ClassifyResult residual_classify(const std::vector<double>& x,
                                        const ClassDictSet& train, double lambda) {
    if (lambda <= 0.0)
        throw std::invalid_argument("residual_classify: lambda must be > 0");
    if (x.size() != train.dim())
        throw std::invalid_argument("residual_classify: dimension mismatch");
    ClassifyResult out;
    out.scores.resize(train.classes());
    SolverOptions opts;
    opts.max_iter = 2000;
    for (index_t c = 0; c < train.classes(); ++c) {
        const Dictionary& Dc = train.dicts[c];
        auto code = cd_lasso(x, Dc, lambda, opts, SparseCode(Dc.size()));
        out.scores[c] = lasso_objective(x, Dc, code.to_dense(), lambda);
        if (out.scores[c] < out.scores[out.label]) out.label = c;
    }
    return out;
}

}  // namespace sparsekit
