// Command-line front end: dictionary learning, sparse encoding, regularization
// paths, denoising, inpainting, and classification over SPMX / PGM / PPM files.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsekit/sparsekit.hpp"

namespace sk = sparsekit;

namespace {

void write_trace(const std::string& path, const sk::LearnTrace& trace) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write trace: " + path);
    for (std::size_t i = 0; i < trace.objectives.size(); ++i)
        out << "iter\t" << i + 1 << "\tobjective\t" << trace.objectives[i] << "\n";
    for (const auto& ev : trace.events) out << "event\t" << ev << "\n";
}

std::vector<double> column(const sk::DenseMatrix& M, sk::index_t k) {
    return std::vector<double>(M.col(k), M.col(k) + M.rows);
}

sk::Dictionary load_dictionary(const std::string& path) {
    return sk::Dictionary(sk::read_spmx(path));
}

int run_learn(const std::string& algo, const std::string& input,
              const std::string& out, const std::string& trace_path,
              sk::LearnConfig cfg, sk::index_t draws) {
    sk::DenseMatrix X = sk::read_spmx(input);
    sk::Dictionary D{sk::DenseMatrix(1, 1)};
    sk::LearnTrace trace;
    if (algo == "mod") {
        auto r = sk::dl_mod(X, cfg);
        D = std::move(r.D);
        trace = std::move(r.trace);
    } else if (algo == "ksvd") {
        auto r = sk::dl_ksvd(X, cfg);
        D = std::move(r.D);
        trace = std::move(r.trace);
    } else if (algo == "alt_l1") {
        auto r = sk::dl_alt_l1(X, cfg);
        D = std::move(r.D);
        trace = std::move(r.trace);
    } else if (algo == "bcd") {
        auto r = sk::dl_bcd(X, cfg);
        D = std::move(r.D);
        trace = std::move(r.trace);
    } else if (algo == "online") {
        auto r = sk::dl_online(X, cfg, draws > 0 ? draws : X.cols);
        D = std::move(r.D);
        trace = std::move(r.trace);
    } else if (algo == "sgd") {
        auto r = sk::dl_sgd(X, cfg, draws > 0 ? draws : X.cols);
        D = std::move(r.first);
        trace = std::move(r.second);
    } else if (algo == "kmeans") {
        auto r = sk::kmeans(X, cfg.p, cfg.outer_iters, cfg.rng_seed);
        D = sk::project_unit_columns(std::move(r.centroids));
        trace.objectives = std::move(r.objectives);
    } else {
        throw std::invalid_argument("unknown learning algorithm: " + algo);
    }
    sk::write_spmx(out, D.atoms);
    write_trace(trace_path, trace);
    return 0;
}

int run_encode(const std::string& dict_path, const std::string& input,
               const std::string& out, const std::string& solver, double lambda,
               sk::index_t k, double eps, unsigned threads) {
    sk::Dictionary D = load_dictionary(dict_path);
    sk::DenseMatrix X = sk::read_spmx(input);
    if (X.rows != D.dim())
        throw std::invalid_argument("encode: signal/dictionary dimension mismatch");
    sk::DenseMatrix A(D.size(), X.cols);
    sk::GramCache cache(D);
    sk::SolverOptions opts;
    const double iht_eta =
        solver == "iht" ? 1.0 / std::max(sk::gram_spectral_norm(D), 1e-12) : 0.0;
    auto store = [&](sk::index_t i, const sk::SparseCode& code) {
        auto dense = code.to_dense();
        std::copy(dense.begin(), dense.end(), A.col(i));
    };
    sk::parallel_for(X.cols, threads, [&](sk::index_t i) {
        std::vector<double> x = column(X, i);
        if (solver == "omp") {
            sk::StopRule stop = eps > 0.0 ? sk::StopRule(sk::BothStop{k, eps})
                                          : sk::StopRule(sk::MaxNonzeros{k});
            store(i, sk::omp(x, D, stop, &cache).code);
        } else if (solver == "mp") {
            store(i, sk::mp(x, D, sk::MaxNonzeros{k}).code);
        } else if (solver == "iht") {
            store(i, sk::iht(x, D, sk::TopK{k}, iht_eta, 200, sk::SparseCode(D.size())));
        } else if (solver == "cd") {
            store(i, sk::cd_lasso(x, D, lambda, opts, sk::SparseCode(D.size()), {},
                                  sk::CdOrder::Cyclic, &cache));
        } else if (solver == "ista" || solver == "fista") {
            sk::SolverOptions o = opts;
            o.accelerate = solver == "fista";
            sk::LassoProblem prob{x, &D, sk::Penalized{lambda}};
            store(i, sk::prox_grad(prob, o, sk::SparseCode(D.size())));
        } else if (solver == "homotopy") {
            store(i, sk::homotopy_solve(x, D, sk::AtLambda{lambda}, {}, &cache));
        } else {
            throw std::invalid_argument("unknown solver: " + solver);
        }
    });
    sk::write_spmx(out, A);
    return 0;
}

int run_path(const std::string& dict_path, const std::string& input,
             const std::string& out_prefix, sk::index_t col) {
    sk::Dictionary D = load_dictionary(dict_path);
    sk::DenseMatrix X = sk::read_spmx(input);
    if (col >= X.cols) throw std::invalid_argument("path: column index out of range");
    auto path = sk::homotopy(column(X, col), D, sk::FullPath{});
    const sk::index_t nk = path.kinks.size();
    sk::DenseMatrix lambdas(nk, 1), codes(D.size(), nk);
    for (sk::index_t t = 0; t < nk; ++t) {
        lambdas(t, 0) = path.kinks[t].first;
        auto dense = path.kinks[t].second.to_dense();
        std::copy(dense.begin(), dense.end(), codes.col(t));
    }
    sk::write_spmx(out_prefix + ".lambdas.spmx", lambdas);
    sk::write_spmx(out_prefix + ".codes.spmx", codes);
    return 0;
}

sk::DenoiseScenario parse_scenario(const std::string& s) {
    if (s == "dct") return sk::DenoiseScenario::DCT;
    if (s == "global") return sk::DenoiseScenario::GlobalDict;
    if (s == "adapt0") return sk::DenoiseScenario::AdaptiveL0;
    if (s == "adapt1") return sk::DenoiseScenario::AdaptiveL1;
    throw std::invalid_argument("unknown scenario: " + s);
}

int run_denoise(const std::string& input, const std::string& out,
                const std::string& scenario_name, double sigma,
                const std::string& dict_path, const std::string& ref_path,
                const std::string& report_path, sk::DenoiseParams params,
                double chi2_tau) {
    sk::Image noisy = sk::read_image(input);
    sk::Image ref;
    if (!ref_path.empty()) {
        ref = sk::read_image(ref_path);
        params.reference = &ref;
    }
    sk::Dictionary D{sk::DenseMatrix(1, 1)};
    const sk::Dictionary* global = nullptr;
    if (!dict_path.empty()) {
        D = load_dictionary(dict_path);
        global = &D;
    }
    sk::NoiseModel noise;
    noise.sigma = sigma;
    if (chi2_tau > 0.0) noise.rule = sk::ChiSquare{chi2_tau};
    auto scenario = parse_scenario(scenario_name);
    auto [img, report] = sk::denoise(noisy, noise, scenario, params, global);
    sk::write_image(img, out);
    if (!report_path.empty()) {
        std::ofstream r(report_path);
        r << "scenario\tsigma\tpatch_side\tpatches\tepsilon\tpsnr\n";
        r << scenario_name << "\t" << sigma << "\t" << report.patch_side << "\t"
          << report.patches << "\t" << report.epsilon << "\t" << report.psnr << "\n";
    }
    return 0;
}

int run_inpaint(const std::string& input, const std::string& mask_path,
                const std::string& dict_path, const std::string& out,
                sk::InpaintParams params) {
    sk::Image img = sk::read_image(input);
    sk::Image mask_img = sk::read_image(mask_path);
    if (mask_img.width != img.width || mask_img.height != img.height)
        throw std::invalid_argument("inpaint: mask size mismatch");
    sk::Mask mask(img.width, img.height);
    for (sk::index_t y = 0; y < img.height; ++y)
        for (sk::index_t x = 0; x < img.width; ++x)
            mask.set(x, y, mask_img.at(x, y) >= 128.0);
    sk::Dictionary D = load_dictionary(dict_path);
    sk::Image filled = sk::inpaint(img, mask, D, params);
    sk::write_image(filled, out);
    return 0;
}

int run_classify(const std::vector<std::string>& dict_paths,
                 const std::string& input, const std::string& out,
                 const std::string& mode, double lambda) {
    std::vector<sk::Dictionary> dicts;
    for (const auto& p : dict_paths) dicts.push_back(load_dictionary(p));
    sk::ClassDictSet set(std::move(dicts));
    sk::DenseMatrix X = sk::read_spmx(input);
    std::vector<int> labels(X.cols);
    for (sk::index_t i = 0; i < X.cols; ++i) {
        auto x = column(X, i);
        labels[i] = static_cast<int>(mode == "residual"
                                         ? sk::residual_classify(x, set, lambda).label
                                         : sk::src_classify(x, set, lambda).label);
    }
    sk::write_labels(out, labels);
    return 0;
}

int run_bench(const std::vector<std::string>& images, double sigma,
              const std::vector<std::string>& scenarios, const std::string& out,
              const std::string& dict_path, sk::DenoiseParams params,
              std::uint64_t seed) {
    sk::Dictionary Dg{sk::DenseMatrix(1, 1)};
    const sk::Dictionary* global = nullptr;
    if (!dict_path.empty()) {
        Dg = load_dictionary(dict_path);
        global = &Dg;
    }
    std::ostringstream table;
    table << "image\tsigma";
    for (const auto& s : scenarios) table << "\t" << s;
    table << "\n";
    for (const auto& path : images) {
        sk::Image clean = sk::read_image(path);
        sk::Image noisy = sk::add_noise(clean, sigma, seed);
        table << path << "\t" << sigma;
        for (const auto& s : scenarios) {
            sk::DenoiseParams p = params;
            p.reference = &clean;
            sk::NoiseModel noise{sigma, sk::Fixed115{}};
            auto [img, report] =
                sk::denoise(noisy, noise, parse_scenario(s), p, global);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", report.psnr);
            table << "\t" << buf;
        }
        table << "\n";
    }
    std::ofstream o(out);
    if (!o) throw std::invalid_argument("cannot write report: " + out);
    o << table.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse coding and dictionary learning toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");

    std::uint64_t seed = 0;
    unsigned threads = sk::default_thread_count();
    app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "worker thread count")
        ->capture_default_str();

    // learn
    auto* learn = app.add_subcommand("learn", "learn a dictionary from signals");
    std::string algo = "ksvd", input, output, trace_path;
    sk::index_t p = 256, k = 4, iters = 10, draws = 0, minibatch = 1;
    double lambda = 0.1, eps = 0.0;
    learn->add_option("--algo", algo, "mod|ksvd|alt_l1|bcd|online|sgd|kmeans");
    learn->add_option("--input", input, "signal matrix (SPMX)")->required();
    learn->add_option("--out", output, "output dictionary (SPMX)")->required();
    learn->add_option("--trace", trace_path, "objective trace file");
    learn->add_option("--p", p, "atom count");
    learn->add_option("--k", k, "target sparsity");
    learn->add_option("--lambda", lambda, "l1 penalty");
    learn->add_option("--eps", eps, "residual threshold");
    learn->add_option("--iters,--epochs", iters, "outer iterations / epochs");
    learn->add_option("--draws", draws, "total draws (online/sgd)");
    learn->add_option("--minibatch", minibatch, "mini-batch size (online)");

    // encode
    auto* encode = app.add_subcommand("encode", "sparse-code signals");
    std::string e_dict, e_input, e_out, solver = "omp";
    double e_lambda = 0.1, e_eps = 0.0;
    sk::index_t e_k = 4;
    encode->add_option("--dict", e_dict, "dictionary (SPMX)")->required();
    encode->add_option("--input", e_input, "signals (SPMX)")->required();
    encode->add_option("--out", e_out, "codes (SPMX)")->required();
    encode->add_option("--solver", solver, "omp|mp|iht|cd|ista|fista|homotopy");
    encode->add_option("--lambda", e_lambda, "l1 penalty");
    encode->add_option("--k", e_k, "target sparsity");
    encode->add_option("--eps", e_eps, "residual threshold");

    // path
    auto* pathc = app.add_subcommand("path", "trace a full regularization path");
    std::string p_dict, p_input, p_out;
    sk::index_t p_col = 0;
    pathc->add_option("--dict", p_dict, "dictionary (SPMX)")->required();
    pathc->add_option("--input", p_input, "signals (SPMX)")->required();
    pathc->add_option("--out", p_out, "output prefix")->required();
    pathc->add_option("--col", p_col, "signal column index");

    // denoise
    auto* den = app.add_subcommand("denoise", "patch-based image denoising");
    std::string d_input, d_out, d_scenario = "dct", d_dict, d_ref, d_report;
    double d_sigma = 25.0, d_tau = 0.0, d_recon_lambda = 0.0, d_learn_lambda = 0.0;
    sk::index_t d_patch = 0, d_dictsize = 256, d_learn_iters = 10;
    den->add_option("--input", d_input, "noisy image (PGM/PPM)")->required();
    den->add_option("--out", d_out, "output image")->required();
    den->add_option("--sigma", d_sigma, "noise std")->required();
    den->add_option("--scenario", d_scenario, "dct|global|adapt0|adapt1");
    den->add_option("--dict", d_dict, "global dictionary (SPMX)");
    den->add_option("--ref", d_ref, "clean reference for PSNR");
    den->add_option("--report", d_report, "TSV report path");
    den->add_option("--patch", d_patch, "patch side (0 = by sigma)");
    den->add_option("--dict-size", d_dictsize, "atoms for DCT/learned dictionaries");
    den->add_option("--learn-iters", d_learn_iters, "adaptive learning iterations");
    den->add_option("--learn-lambda", d_learn_lambda, "l1 weight for adapt1 training");
    den->add_option("--recon-lambda", d_recon_lambda, "l1 reconstruction weight");
    den->add_option("--chi2-tau", d_tau, "use chi-square epsilon rule at this tau");

    // inpaint
    auto* inp = app.add_subcommand("inpaint", "fill masked pixels");
    std::string i_input, i_mask, i_dict, i_out;
    double i_sigma = 1.0;
    sk::index_t i_patch = 8, i_stride = 1, i_iters = 10;
    bool i_keep = true;
    inp->add_option("--input", i_input, "image (PGM)")->required();
    inp->add_option("--mask", i_mask, "mask image (PGM, >=128 observed)")->required();
    inp->add_option("--dict", i_dict, "initial dictionary (SPMX)")->required();
    inp->add_option("--out", i_out, "output image")->required();
    inp->add_option("--sigma-hat", i_sigma, "assumed noise std on observed pixels");
    inp->add_option("--patch", i_patch, "patch side");
    inp->add_option("--stride", i_stride, "grid stride");
    inp->add_option("--iters", i_iters, "masked learning iterations");
    inp->add_flag("--keep-observed,!--no-keep-observed", i_keep,
                  "copy observed pixels from the input");

    // classify
    auto* cls = app.add_subcommand("classify", "sparse-representation classification");
    std::vector<std::string> c_dicts;
    std::string c_input, c_out, c_mode = "src";
    double c_lambda = 0.0;
    cls->add_option("--dicts", c_dicts, "per-class dictionaries (SPMX)")->required();
    cls->add_option("--input", c_input, "test signals (SPMX)")->required();
    cls->add_option("--out", c_out, "label output (one per line)")->required();
    cls->add_option("--mode", c_mode, "src|residual");
    cls->add_option("--lambda", c_lambda, "l1 penalty (0 = default rule)");

    // bench
    auto* bench = app.add_subcommand("bench", "denoising PSNR table");
    std::vector<std::string> b_images, b_scenarios = {"dct", "adapt0", "adapt1"};
    std::string b_out, b_dict;
    double b_sigma = 25.0;
    sk::index_t b_patch = 0, b_learn_iters = 10;
    bench->add_option("--images", b_images, "clean images (PGM)")->required();
    bench->add_option("--out", b_out, "TSV output")->required();
    bench->add_option("--sigma", b_sigma, "noise std");
    bench->add_option("--scenarios", b_scenarios, "scenario list");
    bench->add_option("--dict", b_dict, "global dictionary (SPMX)");
    bench->add_option("--patch", b_patch, "patch side (0 = by sigma)");
    bench->add_option("--learn-iters", b_learn_iters, "adaptive learning iterations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*learn) {
            sk::LearnConfig cfg;
            cfg.p = p;
            cfg.k = k;
            cfg.lambda = lambda;
            cfg.eps = eps;
            cfg.outer_iters = iters;
            cfg.rng_seed = seed;
            cfg.minibatch = minibatch;
            cfg.threads = threads;
            return run_learn(algo, input, output, trace_path, cfg, draws);
        }
        if (*encode)
            return run_encode(e_dict, e_input, e_out, solver, e_lambda, e_k, e_eps,
                              threads);
        if (*pathc) return run_path(p_dict, p_input, p_out, p_col);
        if (*den) {
            sk::DenoiseParams params;
            params.patch_side = d_patch;
            params.dict_size = d_dictsize;
            params.learn_iters = d_learn_iters;
            params.learn_lambda = d_learn_lambda;
            params.recon_lambda = d_recon_lambda;
            params.seed = seed;
            params.threads = threads;
            return run_denoise(d_input, d_out, d_scenario, d_sigma, d_dict, d_ref,
                               d_report, params, d_tau);
        }
        if (*inp) {
            sk::InpaintParams params;
            params.sigma_hat = i_sigma;
            params.patch_side = i_patch;
            params.stride = i_stride;
            params.learn_iters = i_iters;
            params.keep_observed = i_keep;
            params.seed = seed;
            params.threads = threads;
            return run_inpaint(i_input, i_mask, i_dict, i_out, params);
        }
        if (*cls) return run_classify(c_dicts, c_input, c_out, c_mode, c_lambda);
        if (*bench) {
            sk::DenoiseParams params;
            params.patch_side = b_patch;
            params.learn_iters = b_learn_iters;
            params.seed = seed;
            params.threads = threads;
            return run_bench(b_images, b_sigma, b_scenarios, b_out, b_dict, params,
                             seed);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
