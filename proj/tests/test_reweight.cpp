#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sparsekit/convex.hpp"
#include "sparsekit/reweight.hpp"
#include "sparsekit/rng.hpp"

using namespace sparsekit;

namespace {

DenseMatrix random_unit_columns(index_t m, index_t p, Rng& rng) {
    DenseMatrix M(m, p);
    for (auto& v : M.values) v = rng.gaussian();
    for (index_t j = 0; j < p; ++j) {
        const double n = norm2(M.col(j), m);
        for (index_t i = 0; i < m; ++i) M(i, j) /= n;
    }
    return M;
}

DenseMatrix random_orthonormal(index_t m, Rng& rng) {
    DenseMatrix Q = random_unit_columns(m, m, rng);
    for (index_t j = 0; j < m; ++j) {
        for (index_t i = 0; i < j; ++i) {
            const double c = dot(Q.col(i), Q.col(j), m);
            for (index_t r = 0; r < m; ++r) Q(r, j) -= c * Q(r, i);
        }
        const double n = norm2(Q.col(j), m);
        for (index_t r = 0; r < m; ++r) Q(r, j) /= n;
    }
    return Q;
}

}  // namespace

TEST_CASE("reweighted_l1 log objective non-increasing") {
    Rng rng(30);
    Dictionary D(random_unit_columns(10, 24, rng));
    std::vector<double> x(10);
    for (auto& v : x) v = rng.gaussian();
    const double lam = 0.1;
    ReweightConfig cfg;
    cfg.outer_iters = 1;
    cfg.inner.max_iter = 3000;
    SparseCode a(D.size());
    double prev = reweighted_l1_objective(x, D, a, lam, cfg.eps);
    for (int t = 0; t < 10; ++t) {
        a = reweighted_l1(x, D, lam, cfg, a);
        const double obj = reweighted_l1_objective(x, D, a, lam, cfg.eps);
        CHECK(obj <= prev + 1e-9);
        prev = obj;
    }
    CHECK_THROWS_AS(reweighted_l1(x, D, -1.0, cfg, a), std::invalid_argument);
    ReweightConfig bad = cfg;
    bad.eps = 0.0;
    CHECK_THROWS_AS(reweighted_l1(x, D, lam, bad, a), std::invalid_argument);
}

TEST_CASE("reweighted_l1 first iteration is a plain lasso") {
    Rng rng(31);
    Dictionary D(random_unit_columns(8, 16, rng));
    std::vector<double> x(8);
    for (auto& v : x) v = rng.gaussian();
    ReweightConfig cfg;
    cfg.outer_iters = 1;
    cfg.inner.max_iter = 5000;
    cfg.inner.tol = 1e-10;
    const double lam = 0.05;
    auto rw = reweighted_l1(x, D, lam, cfg, SparseCode(D.size())).to_dense();
    // weights from alpha0 = 0 are uniformly 1/eps, so this is a Lasso at lam/eps
    auto plain = cd_lasso(x, D, lam / cfg.eps, cfg.inner, SparseCode(D.size())).to_dense();
    for (index_t j = 0; j < D.size(); ++j)
        CHECK(rw[j] == Catch::Approx(plain[j]).margin(1e-8));
}

TEST_CASE("irls_l1 orthonormal closed form and lasso limit") {
    Rng rng(32);
    const index_t m = 6;
    Dictionary D(random_orthonormal(m, rng));
    std::vector<double> x(m);
    for (auto& v : x) v = rng.gaussian();
    std::vector<double> beta(m);
    matvec_t(D.atoms, x, beta);
    const double lam = 0.2;

    // one alternation step from alpha=0: eta = sqrt(eps) uniform, closed form
    ReweightConfig one;
    one.eps = 0.5;
    one.outer_iters = 1;
    auto a1 = irls_l1(x, D, lam, one).to_dense();
    const double eta0 = std::sqrt(one.eps);
    for (index_t j = 0; j < m; ++j)
        CHECK(a1[j] == Catch::Approx(beta[j] * eta0 / (eta0 + lam)).margin(1e-10));

    // eps large behaves like ridge: all coordinates nonzero
    ReweightConfig big;
    big.eps = 1e6;
    big.outer_iters = 5;
    auto ridge = irls_l1(x, D, lam, big).to_dense();
    for (index_t j = 0; j < m; ++j) CHECK(ridge[j] != 0.0);

    // eps -> 0: objective within 1e-4 relative of the homotopy Lasso optimum
    Dictionary Dr(random_unit_columns(10, 20, rng));
    std::vector<double> xr(10);
    for (auto& v : xr) v = rng.gaussian();
    ReweightConfig tiny;
    tiny.eps = 1e-10;
    tiny.outer_iters = 50;
    auto irls = irls_l1(xr, Dr, lam, tiny).to_dense();
    auto opt = homotopy_solve(xr, Dr, AtLambda{lam}).to_dense();
    CHECK(lasso_objective(xr, Dr, irls, lam) <=
          lasso_objective(xr, Dr, opt, lam) * (1.0 + 1e-4) + 1e-12);
}

TEST_CASE("irls_l1 joint objective non-increasing") {
    Rng rng(33);
    Dictionary D(random_unit_columns(9, 18, rng));
    std::vector<double> x(9);
    for (auto& v : x) v = rng.gaussian();
    const double lam = 0.15, eps = 1e-3;
    ReweightConfig cfg;
    cfg.eps = eps;
    double prev = -1.0;
    for (index_t T = 1; T <= 12; ++T) {
        cfg.outer_iters = T;
        auto a = irls_l1(x, D, lam, cfg).to_dense();
        const double obj = irls_l1_objective(x, D, a, lam, eps);
        if (prev >= 0.0) CHECK(obj <= prev + 1e-9);
        prev = obj;
    }
}

TEST_CASE("irls_lq") {
    Rng rng(34);
    Dictionary D(random_unit_columns(8, 16, rng));
    std::vector<double> x(8);
    for (auto& v : x) v = rng.gaussian();
    const double lam = 0.1;
    ReweightConfig cfg;
    cfg.outer_iters = 15;

    CHECK_THROWS_AS(irls_lq(x, D, lam, 0.0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(irls_lq(x, D, lam, 2.0, cfg), std::invalid_argument);

    // q = 1 reduces exactly to irls_l1
    auto lq = irls_lq(x, D, lam, 1.0, cfg).to_dense();
    auto l1 = irls_l1(x, D, lam, cfg).to_dense();
    for (index_t j = 0; j < D.size(); ++j) CHECK(lq[j] == Catch::Approx(l1[j]).margin(1e-12));

    // small q on a noiseless sparse instance recovers the planted support
    int hits = 0;
    for (int t = 0; t < 20; ++t) {
        Dictionary Ds(random_unit_columns(8, 12, rng));
        const index_t j1 = static_cast<index_t>(rng.integer(12));
        index_t j2 = j1;
        while (j2 == j1) j2 = static_cast<index_t>(rng.integer(12));
        std::vector<double> xs(8);
        const double c1 = 1.0 + rng.uniform(), c2 = 1.0 + rng.uniform();
        for (index_t i = 0; i < 8; ++i)
            xs[i] = c1 * Ds.atom(j1)[i] + c2 * Ds.atom(j2)[i];
        ReweightConfig scfg;
        scfg.eps = 1e-8;
        scfg.outer_iters = 100;
        auto code = irls_lq(xs, Ds, 1e-6, 0.5, scfg);
        std::vector<index_t> sup;
        auto dense = code.to_dense();
        for (index_t j = 0; j < 12; ++j)
            if (std::fabs(dense[j]) > 1e-4) sup.push_back(j);
        std::vector<index_t> want{std::min(j1, j2), std::max(j1, j2)};
        if (sup == want) ++hits;
    }
    CHECK(hits >= 18);  // non-convex method; near-perfect on easy instances
}

TEST_CASE("irls_group") {
    Rng rng(35);
    const index_t m = 6;
    Dictionary D(random_orthonormal(m, rng));
    std::vector<double> x(m);
    for (auto& v : x) v = rng.gaussian();
    std::vector<double> beta(m);
    matvec_t(D.atoms, x, beta);
    const double lam = 0.3;
    GroupStructure G{{{0, 1}, {2, 3}, {4, 5}}};

    // orthonormal D, eps -> 0 converges to group_threshold(beta, lam)
    ReweightConfig cfg;
    cfg.eps = 1e-12;
    cfg.outer_iters = 200;
    auto got = irls_group(x, D, lam, G, cfg).to_dense();
    auto want = group_threshold(beta, G, lam);
    for (index_t j = 0; j < m; ++j) CHECK(got[j] == Catch::Approx(want[j]).margin(1e-4));

    // singleton groups reduce to irls_l1
    GroupStructure S{{{0}, {1}, {2}, {3}, {4}, {5}}};
    ReweightConfig c2;
    c2.outer_iters = 10;
    auto gs = irls_group(x, D, lam, S, c2).to_dense();
    auto l1 = irls_l1(x, D, lam, c2).to_dense();
    for (index_t j = 0; j < m; ++j) CHECK(gs[j] == Catch::Approx(l1[j]).margin(1e-12));

    // group objective non-increasing
    Dictionary Dr(random_unit_columns(8, 12, rng));
    std::vector<double> xr(8);
    for (auto& v : xr) v = rng.gaussian();
    GroupStructure Gr{{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {9, 10, 11}}};
    double prev = -1.0;
    for (index_t T = 1; T <= 10; ++T) {
        ReweightConfig c;
        c.outer_iters = T;
        auto a = irls_group(xr, Dr, lam, Gr, c).to_dense();
        const double obj = group_lasso_objective(xr, Dr, a, Gr, lam);
        if (prev >= 0.0) CHECK(obj <= prev + 1e-9);
        prev = obj;
    }

    GroupStructure badG{{{0, 1}}};
    CHECK_THROWS_AS(irls_group(x, D, lam, badG, cfg), std::invalid_argument);

    // one group over all indices: matches a 1-D search over the shrinkage scalar
    GroupStructure one{{{0, 1, 2, 3, 4, 5}}};
    ReweightConfig c3;
    c3.eps = 1e-12;
    c3.outer_iters = 300;
    auto whole = irls_group(x, D, lam, one, c3).to_dense();
    // orthonormal D: solution is (1 - lam/||beta||)+ * beta
    const double factor = std::max(0.0, 1.0 - lam / norm2(beta));
    for (index_t j = 0; j < m; ++j)
        CHECK(whole[j] == Catch::Approx(factor * beta[j]).margin(1e-4));
}
