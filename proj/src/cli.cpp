#include "sparse_sr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>

#include "sparse_sr/benchmark.hpp"
#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/errors.hpp"
#include "sparse_sr/image.hpp"
#include "sparse_sr/superres.hpp"

namespace sparse_sr {

namespace {

/// Raised for flag combinations CLI11 cannot check on its own.
struct UsageError : Error {
    using Error::Error;
};

struct TrainArgs {
    std::string hr_dir;
    std::uint32_t scale = 2;
    std::uint32_t patch_size = 8;
    std::uint32_t stride = 4;
    std::size_t atoms = 512;
    std::size_t sparsity = 3;
    std::size_t iters = 20;
    std::size_t max_samples = 20000;
    std::uint64_t seed = 0;
    std::string out;
};

struct UpscaleArgs {
    std::string dict;
    std::string input;
    std::string solver;
    std::optional<double> lambda;
    std::optional<std::size_t> max_iters;
    std::size_t bp_iters = 0;
    std::string reference;
    std::string output;
};

struct BenchmarkArgs {
    std::string dict;
    std::string images;
    std::string solvers = "omp,ista,sl0,qp";
    std::string csv;
    std::uint64_t seed = 0;
    std::optional<double> lambda;
    std::optional<std::size_t> max_iters;
    std::size_t bp_iters = 0;
    bool bicubic = false;
    std::string dump_dir;
};

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        if (comma > start) items.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return items;
}

std::vector<std::string> parse_solver_list(const std::string& text)
{
    std::vector<std::string> names;
    for (const auto& s : split_list(text)) names.emplace_back(to_string(parse_solver_kind(s)));
    if (names.empty()) throw InvalidArgument("no solvers given (valid: " + std::string(kSolverNames) + ")");
    return names;
}

/// Validator turning parse_solver_kind's message into a usage error.
CLI::Validator solver_list_validator()
{
    return CLI::Validator(
        [](std::string& value) -> std::string {
            try {
                parse_solver_list(value);
                return {};
            } catch (const InvalidArgument& e) {
                return e.what();
            }
        },
        "SOLVER[,SOLVER...]");
}

std::string format_psnr(double db)
{
    if (std::isinf(db)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", db);
    return buf;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text << '\n';
    if (!f) throw IoError("write failed for '" + path + "'");
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.scale < 2) throw UsageError("--scale must be >= 2");
    if (a.patch_size < 1) throw UsageError("--patch-size must be >= 1");
    if (a.stride < 1 || a.stride > a.patch_size) throw UsageError("--stride must lie in [1, --patch-size]");
    if (a.atoms < 1 || a.sparsity < 1 || a.iters < 1 || a.max_samples < 1) {
        throw UsageError("--atoms, --sparsity, --iters and --max-samples must be >= 1");
    }

    const auto images = load_image_dir(a.hr_dir);
    if (images.empty()) throw Error("no .pgm images in '" + a.hr_dir + "'");

    const Index p = a.patch_size;
    std::vector<VecD> hr_cols, lr_cols;
    for (const auto& img : images) {
        const Raster hr = crop_to_multiple(img.image, a.scale);
        if (hr.width() < p || hr.height() < p) {
            err << "skipping " << img.name << ": smaller than the patch size\n";
            continue;
        }
        const Raster mid = bicubic_resize(degrade(hr, a.scale), hr.width(), hr.height());
        const PatchGrid hr_grid = extract_patches(hr, p, a.stride);
        const PatchGrid mid_grid = extract_patches(mid, p, a.stride);
        const MatD feats = lr_features(mid, p, a.stride);
        for (Index i = 0; i < hr_grid.count(); ++i) {
            VecD h = hr_grid.patches.col(i).array() - mid_grid.patches.col(i).mean();
            if (h.squaredNorm() == 0.0 && feats.col(i).squaredNorm() == 0.0) continue;
            hr_cols.push_back(std::move(h));
            lr_cols.emplace_back(feats.col(i));
        }
    }
    if (hr_cols.empty()) throw Error("the training images produced no non-flat patches");

    // seeded subsample, kept in extraction order
    Rng rng(a.seed);
    std::vector<std::size_t> order(hr_cols.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (order.size() > a.max_samples) {
        for (std::size_t i = 0; i < a.max_samples; ++i) {
            std::swap(order[i], order[i + static_cast<std::size_t>(rng.index(order.size() - i))]);
        }
        order.resize(a.max_samples);
        std::sort(order.begin(), order.end());
    }

    TrainSet hr_set, lr_set;
    hr_set.samples.resize(p * p, static_cast<Index>(order.size()));
    lr_set.samples.resize(4 * p * p, static_cast<Index>(order.size()));
    for (std::size_t c = 0; c < order.size(); ++c) {
        hr_set.samples.col(static_cast<Index>(c)) = hr_cols[order[c]];
        lr_set.samples.col(static_cast<Index>(c)) = lr_cols[order[c]];
    }

    std::size_t m = a.atoms;
    if (m > order.size()) {
        err << "note: reducing atoms from " << m << " to the sample count " << order.size() << "\n";
        m = order.size();
    }
    CoupledDictionary cd = coupled_train(hr_set, lr_set, m, a.sparsity, a.iters, rng);
    cd.scale = a.scale;
    cd.patch_size_hr = a.patch_size;
    cd.overlap_hr = a.patch_size - a.stride;
    cd.seed = a.seed;
    save_dictionary(cd, a.out);

    const double final_error = cd.error_trace.empty() ? 0.0 : cd.error_trace.back();
    const double data_norm = std::sqrt(hr_set.samples.squaredNorm() / (p * p) +
                                       lr_set.samples.squaredNorm() / (4.0 * p * p));
    out << "samples=" << order.size() << " atoms=" << m << "\n";
    out << "final_error=" << final_error << " relative=" << (data_norm > 0 ? final_error / data_norm : 0.0) << "\n";
    return kExitOk;
}

int cmd_upscale(const UpscaleArgs& a, std::ostream& out)
{
    const CoupledDictionary cd = load_dictionary(a.dict);
    const Raster lr = read_pgm(a.input);
    UpscaleConfig cfg = UpscaleConfig::for_dictionary(a.solver, cd);
    if (a.lambda) cfg.solver_cfg.lambda = *a.lambda;
    if (a.max_iters) cfg.solver_cfg.max_iters = *a.max_iters;
    cfg.back_projection_iters = a.bp_iters;
    const Raster hr = upscale(lr, cd, cfg);
    write_pgm(hr, a.output);
    if (!a.reference.empty()) {
        // compare what was actually written, after rounding
        const Raster written = read_pgm(a.output);
        out << "psnr_db=" << format_psnr(psnr(written, read_pgm(a.reference)).psnr_db) << "\n";
    }
    return kExitOk;
}

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out)
{
    const CoupledDictionary cd = load_dictionary(a.dict);
    const auto images = load_image_dir(a.images);
    if (images.empty()) throw Error("no .pgm images in '" + a.images + "'");
    BenchmarkConfig cfg;
    cfg.lambda = a.lambda;
    cfg.max_iters = a.max_iters;
    cfg.back_projection_iters = a.bp_iters;
    cfg.include_bicubic = a.bicubic;
    cfg.dump_dir = a.dump_dir;
    cfg.seed = a.seed;
    BenchmarkReport report = run_benchmark(cd, images, parse_solver_list(a.solvers), cfg);
    report.metadata.dictionary_path = a.dict;
    const std::string csv = report_to_csv(report);
    if (!a.csv.empty()) write_text(a.csv, csv);
    out << csv << "\n";
    return kExitOk;
}

int cmd_synth(SynthConfig cfg, const std::string& solvers, std::ostream& out)
{
    if (cfg.k < 0 || cfg.k > cfg.n) {
        throw UsageError("--k " + std::to_string(cfg.k) + " must lie in [0, --n " + std::to_string(cfg.n) + "]");
    }
    if (cfg.k > cfg.m) throw UsageError("--k must not exceed --m");
    cfg.solvers = parse_solver_list(solvers);
    out << synth_to_csv(run_synth(cfg)) << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Sparse-coding image super-resolution: train, upscale, benchmark, synth", "sparse-sr"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Learn a coupled HR/LR dictionary from HR images");
    train_cmd->add_option("--hr-dir", train.hr_dir, "Directory of HR training PGMs")->required();
    train_cmd->add_option("--scale", train.scale, "Magnification factor")->capture_default_str();
    train_cmd->add_option("--patch-size", train.patch_size, "HR patch size p")->capture_default_str();
    train_cmd->add_option("--stride", train.stride, "Patch stride")->capture_default_str();
    train_cmd->add_option("--atoms", train.atoms, "Dictionary size m")->capture_default_str();
    train_cmd->add_option("--sparsity", train.sparsity, "Atoms per training code")->capture_default_str();
    train_cmd->add_option("--iters", train.iters, "K-SVD iterations")->capture_default_str();
    train_cmd->add_option("--max-samples", train.max_samples, "Cap on pooled patches")->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "RNG seed")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output CDL1 file")->required();

    UpscaleArgs up;
    const std::string solver_help = "One of " + std::string(kSolverNames);
    auto* up_cmd = app.add_subcommand("upscale", "Super-resolve one PGM");
    up_cmd->add_option("--dict", up.dict, "CDL1 dictionary")->required();
    up_cmd->add_option("--input", up.input, "LR input PGM")->required();
    up_cmd->add_option("--solver", up.solver, solver_help)->required()->check(solver_list_validator());
    up_cmd->add_option("--lambda", up.lambda, "ISTA/QP regularization weight");
    up_cmd->add_option("--max-iters", up.max_iters, "Iteration cap for iterative solvers");
    up_cmd->add_option("--bp-iters", up.bp_iters, "Back-projection iterations")->capture_default_str();
    up_cmd->add_option("--reference", up.reference, "HR ground truth; prints psnr_db=<value>");
    up_cmd->add_option("--output", up.output, "Output PGM")->required();

    BenchmarkArgs bench;
    auto* bench_cmd = app.add_subcommand("benchmark", "Degrade, upscale and score a directory of HR images");
    bench_cmd->add_option("--dict", bench.dict, "CDL1 dictionary")->required();
    bench_cmd->add_option("--images", bench.images, "Directory of HR ground-truth PGMs")->required();
    bench_cmd->add_option("--solvers", bench.solvers, "Comma-separated solver list")
        ->capture_default_str()
        ->check(solver_list_validator());
    bench_cmd->add_option("--csv", bench.csv, "Also write the CSV table here");
    bench_cmd->add_option("--seed", bench.seed, "Seed recorded in the report")->capture_default_str();
    bench_cmd->add_option("--lambda", bench.lambda, "ISTA/QP regularization weight");
    bench_cmd->add_option("--max-iters", bench.max_iters, "Iteration cap for iterative solvers");
    bench_cmd->add_option("--bp-iters", bench.bp_iters, "Back-projection iterations")->capture_default_str();
    bench_cmd->add_flag("--bicubic", bench.bicubic, "Add a bicubic baseline row");
    bench_cmd->add_option("--dump-dir", bench.dump_dir, "Write reconstructions here");

    SynthConfig synth;
    std::string synth_solvers = "omp,ista,sl0,qp";
    auto* synth_cmd = app.add_subcommand("synth", "Noiseless sparse recovery trials");
    synth_cmd->add_option("--n", synth.n, "Measurement dimension")->capture_default_str();
    synth_cmd->add_option("--m", synth.m, "Number of atoms")->capture_default_str();
    synth_cmd->add_option("--k", synth.k, "Sparsity")->capture_default_str();
    synth_cmd->add_option("--trials", synth.trials, "Number of trials")->capture_default_str();
    synth_cmd->add_option("--solvers,--solver", synth_solvers, "Comma-separated solver list")
        ->capture_default_str()
        ->check(solver_list_validator());
    synth_cmd->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    synth_cmd->add_option("--lambda", synth.lambda, "ISTA/QP regularization weight")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train, out, err);
        if (*up_cmd) return cmd_upscale(up, out);
        if (*bench_cmd) return cmd_benchmark(bench, out);
        return cmd_synth(synth, synth_solvers, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace sparse_sr
