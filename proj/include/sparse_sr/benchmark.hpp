#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/image.hpp"

namespace sparse_sr {

struct NamedImage {
    std::string name;
    Raster image;
};

/// Every *.pgm in `dir`, sorted by file name; names are the file stems.
std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir);

struct BenchmarkConfig {
    /// Overrides for the per-solver defaults (ISTA/QP only use lambda).
    std::optional<double> lambda;
    std::optional<std::size_t> max_iters;
    std::size_t back_projection_iters = 0;
    /// Adds a "bicubic" row computed from the mid-resolution image alone.
    bool include_bicubic = false;
    /// When set, reconstructions are written here as <solver>_<image>.pgm.
    std::filesystem::path dump_dir;
    std::uint64_t seed = 0;
};

struct BenchmarkMetadata {
    std::string dictionary_path;
    std::uint32_t scale = 0;
    std::string config_digest;
    std::string timestamp;
};

struct BenchmarkReport {
    std::vector<std::string> solver_names;
    std::vector<std::string> image_names;
    /// psnr[s][i] in dB; +infinity for a perfect reconstruction.
    std::vector<std::vector<double>> psnr;
    std::vector<double> average;
    BenchmarkMetadata metadata;
};

/// Arithmetic mean; an infinite entry makes the mean infinite.
double row_average(const std::vector<double>& row);

/// Fills `average` from `psnr`.
void finalize_averages(BenchmarkReport& report);

/// For each solver and image: degrade by the dictionary scale, upscale, and
/// compare with the original. A failing cell aborts with its coordinates.
BenchmarkReport run_benchmark(const CoupledDictionary& cd, const std::vector<NamedImage>& images,
                              const std::vector<std::string>& solvers, const BenchmarkConfig& cfg = {});

/// "solver,<img1>,...,average" then one row per solver, values "%.2f" or
/// "inf". No trailing newline.
std::string report_to_csv(const BenchmarkReport& report);

struct SynthConfig {
    Index n = 20;
    Index m = 50;
    Index k = 3;
    std::size_t trials = 100;
    std::vector<std::string> solvers{"omp", "ista", "sl0", "qp"};
    std::uint64_t seed = 0;
    /// ISTA/QP regularization; their supports are re-fitted by least squares.
    double lambda = 1e-4;
    std::size_t l1_max_iters = 20000;
    double success_tol = 1e-3;
};

struct SynthRow {
    std::string solver;
    double success_rate = 0.0;
    double mean_relative_error = 0.0;
    double mean_runtime_ms = 0.0;
};

struct SynthReport {
    SynthConfig config;
    std::vector<SynthRow> rows;
};

/// Noiseless recovery trials: seeded n×m Gaussian unit-column dictionary,
/// k-sparse code with ±[1, 2] values, x = Dα₀. Every solver sees the same
/// instances. Success means ‖α − α₀‖ ≤ tol·‖α₀‖ (‖α‖ ≤ tol when k = 0).
SynthReport run_synth(const SynthConfig& cfg);

/// "solver,success_rate,mean_rel_error,mean_runtime_ms" plus one row per
/// solver. No trailing newline.
std::string synth_to_csv(const SynthReport& report);

}  // namespace sparse_sr
