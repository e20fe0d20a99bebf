#include "sparse_sr/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>

#include "sparse_sr/errors.hpp"
#include "sparse_sr/solvers.hpp"
#include "sparse_sr/superres.hpp"

namespace sparse_sr {

namespace {

std::string format_db(double v)
{
    if (std::isinf(v) && v > 0) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string format_real(double v, const char* fmt)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

/// FNV-1a, stable across platforms unlike std::hash.
std::string digest(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_timestamp()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

UpscaleConfig cell_config(const std::string& solver, const CoupledDictionary& cd, const BenchmarkConfig& cfg)
{
    UpscaleConfig up = UpscaleConfig::for_dictionary(solver, cd);
    if (cfg.lambda) up.solver_cfg.lambda = *cfg.lambda;
    if (cfg.max_iters) up.solver_cfg.max_iters = *cfg.max_iters;
    up.back_projection_iters = cfg.back_projection_iters;
    return up;
}

}  // namespace

std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<NamedImage> images;
    for (const auto& p : paths) images.push_back({p.stem().string(), read_pgm(p)});
    return images;
}

double row_average(const std::vector<double>& row)
{
    if (row.empty()) throw InvalidArgument("row_average: empty row");
    double sum = 0.0;
    for (double v : row) sum += v;
    return sum / static_cast<double>(row.size());
}

void finalize_averages(BenchmarkReport& report)
{
    report.average.clear();
    for (const auto& row : report.psnr) report.average.push_back(row_average(row));
}

BenchmarkReport run_benchmark(const CoupledDictionary& cd, const std::vector<NamedImage>& images,
                              const std::vector<std::string>& solvers, const BenchmarkConfig& cfg)
{
    if (images.empty()) throw InvalidArgument("benchmark needs at least one image");
    if (solvers.empty() && !cfg.include_bicubic) throw InvalidArgument("benchmark needs at least one solver");
    for (const auto& s : solvers) parse_solver_kind(s);
    if (!cfg.dump_dir.empty()) std::filesystem::create_directories(cfg.dump_dir);

    BenchmarkReport report;
    report.solver_names = solvers;
    if (cfg.include_bicubic) report.solver_names.push_back("bicubic");
    for (const auto& img : images) report.image_names.push_back(img.name);

    const Index scale = cd.scale;
    std::vector<Raster> truth, lows;
    for (const auto& img : images) {
        truth.push_back(crop_to_multiple(img.image, scale));
        lows.push_back(degrade(truth.back(), scale));
    }

    const auto record = [&](const std::string& row, std::size_t i, const Raster& out) {
        if (!cfg.dump_dir.empty()) write_pgm(out, cfg.dump_dir / (row + "_" + images[i].name + ".pgm"));
        return psnr(out, truth[i]).psnr_db;
    };

    std::string description = "scale=" + std::to_string(scale) + ";bp=" + std::to_string(cfg.back_projection_iters);
    for (const auto& s : solvers) {
        const UpscaleConfig up = cell_config(s, cd, cfg);
        description += ";" + s + ":k=" + std::to_string(up.solver_cfg.sparsity_k) +
                       ",lambda=" + format_real(up.solver_cfg.lambda, "%.17g") +
                       ",iters=" + std::to_string(up.solver_cfg.max_iters);
        std::vector<double> row;
        std::unique_ptr<Upscaler> engine;
        for (std::size_t i = 0; i < images.size(); ++i) {
            try {
                if (!engine) engine = std::make_unique<Upscaler>(cd, up);
                row.push_back(record(s, i, engine->run(lows[i])));
            } catch (const std::exception& e) {
                throw Error("benchmark cell (solver '" + s + "', image '" + images[i].name + "'): " + e.what());
            }
        }
        report.psnr.push_back(std::move(row));
    }
    if (cfg.include_bicubic) {
        std::vector<double> row;
        for (std::size_t i = 0; i < images.size(); ++i) {
            row.push_back(record("bicubic", i, bicubic_resize(lows[i], truth[i].width(), truth[i].height())));
        }
        report.psnr.push_back(std::move(row));
    }
    finalize_averages(report);

    report.metadata.scale = cd.scale;
    report.metadata.config_digest = digest(description + ";seed=" + std::to_string(cfg.seed));
    report.metadata.timestamp = utc_timestamp();
    return report;
}

std::string report_to_csv(const BenchmarkReport& report)
{
    std::string out = "solver";
    for (const auto& name : report.image_names) out += "," + name;
    out += ",average";
    for (std::size_t s = 0; s < report.solver_names.size(); ++s) {
        out += "\n" + report.solver_names[s];
        for (double v : report.psnr[s]) out += "," + format_db(v);
        out += "," + format_db(report.average[s]);
    }
    return out;
}

SynthReport run_synth(const SynthConfig& cfg)
{
    if (cfg.n < 1 || cfg.m < 1) throw InvalidArgument("synth: n and m must be positive");
    if (cfg.k < 0 || cfg.k > cfg.n) {
        throw InvalidArgument("synth: k = " + std::to_string(cfg.k) + " must lie in [0, n = " + std::to_string(cfg.n) +
                              "]");
    }
    if (cfg.k > cfg.m) throw InvalidArgument("synth: k exceeds m");
    if (cfg.trials < 1) throw InvalidArgument("synth: trials must be >= 1");
    if (cfg.solvers.empty()) throw InvalidArgument("synth: no solvers given");
    std::vector<SolverKind> kinds;
    for (const auto& s : cfg.solvers) kinds.push_back(parse_solver_kind(s));

    const std::size_t ns = kinds.size();
    std::vector<std::size_t> successes(ns, 0);
    std::vector<double> err_sum(ns, 0.0), ms_sum(ns, 0.0);

    Rng master(cfg.seed);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        Rng rng(master.next());
        MatD d(cfg.n, cfg.m);
        for (Index j = 0; j < cfg.m; ++j) {
            for (Index i = 0; i < cfg.n; ++i) d(i, j) = rng.normal();
            d.col(j).normalize();
        }
        VecD truth = VecD::Zero(cfg.m);
        for (Index placed = 0; placed < cfg.k;) {
            const auto j = static_cast<Index>(rng.index(static_cast<std::uint64_t>(cfg.m)));
            if (truth(j) != 0.0) continue;
            const double mag = rng.uniform(1.0, 2.0);
            truth(j) = rng.uniform() < 0.5 ? -mag : mag;
            ++placed;
        }
        const VecD x = d * truth;
        const double truth_norm = truth.norm();

        for (std::size_t s = 0; s < ns; ++s) {
            SolverConfig<double> sc = SolverConfig<double>::defaults(kinds[s]);
            sc.sparsity_k = static_cast<std::size_t>(cfg.k);
            const bool l1 = kinds[s] == SolverKind::ista || kinds[s] == SolverKind::qp;
            if (kinds[s] == SolverKind::omp) sc.tol = 1e-10;
            if (l1) {
                sc.lambda = cfg.lambda;
                sc.max_iters = cfg.l1_max_iters;
                sc.tol = 1e-10;
            }
            const auto start = std::chrono::steady_clock::now();
            SparseCode<double> code = solve<double>(to_string(kinds[s]), d, x, sc).code;
            if (l1) code = debias(d, x, code);
            const auto stop = std::chrono::steady_clock::now();

            const double diff = (code.to_dense() - truth).norm();
            const double err = truth_norm > 0.0 ? diff / truth_norm : diff;
            successes[s] += err <= cfg.success_tol;
            err_sum[s] += err;
            ms_sum[s] += std::chrono::duration<double, std::milli>(stop - start).count();
        }
    }

    SynthReport report;
    report.config = cfg;
    const auto trials = static_cast<double>(cfg.trials);
    for (std::size_t s = 0; s < ns; ++s) {
        report.rows.push_back({std::string(to_string(kinds[s])), static_cast<double>(successes[s]) / trials,
                               err_sum[s] / trials, ms_sum[s] / trials});
    }
    return report;
}

std::string synth_to_csv(const SynthReport& report)
{
    std::string out = "solver,success_rate,mean_rel_error,mean_runtime_ms";
    for (const auto& row : report.rows) {
        out += "\n" + row.solver + "," + format_real(row.success_rate, "%.4f") + "," +
               format_real(row.mean_relative_error, "%.3e") + "," + format_real(row.mean_runtime_ms, "%.4f");
    }
    return out;
}

}  // namespace sparse_sr
