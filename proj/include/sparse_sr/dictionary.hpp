#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sparse_sr/numerics.hpp"

namespace sparse_sr {

/// Training vectors, one per column.
struct TrainSet {
    MatD samples;

    Index dim() const { return samples.rows(); }
    Index count() const { return samples.cols(); }
};

/// Learned dictionary with unit-norm atoms.
struct Dictionary {
    MatD atoms;
    std::size_t sparsity_k = 0;
    std::size_t train_iters = 0;
    std::uint64_t seed = 0;
    /// ‖X − DA‖_F after each training iteration; not serialized.
    std::vector<double> error_trace;

    /// Fewer atoms than rows. Allowed, but not what training normally produces.
    bool undercomplete() const { return atoms.cols() < atoms.rows(); }
};

inline constexpr const char* kFeatureSpecId = "grad4-v1";

/// HR/LR dictionary pair sharing one code per atom. Stacked atoms
/// (d_hr/p ; d_lr/(2q)) are unit norm; q equals the HR patch size p, so the
/// LR half has 4p² rows.
struct CoupledDictionary {
    MatD d_hr;
    MatD d_lr;
    std::uint32_t scale = 2;
    std::uint32_t patch_size_hr = 8;
    std::uint32_t overlap_hr = 4;
    std::uint32_t sparsity_k = 3;
    std::string feature_spec_id = kFeatureSpecId;
    std::uint64_t seed = 0;
    /// Training error trace of the stacked K-SVD run; not serialized.
    std::vector<double> error_trace;

    Index atom_count() const { return d_hr.cols(); }
    double hr_weight() const;
    double lr_weight() const;
    std::uint32_t stride() const { return patch_size_hr - overlap_hr; }

    /// Largest |‖stacked atom‖ − 1| over all atoms.
    double stacked_norm_defect() const;
};

struct KsvdOptions {
    /// OMP early-exit tolerance (relative residual) during sparse coding.
    double coding_tol = 1e-9;
    /// Relative change in σ that ends each rank-1 power iteration.
    double power_tol = 1e-10;
    std::size_t power_max_iters = 1000;
    /// Explicit starting columns (length m). Empty means a seeded draw.
    std::vector<Index> initial_columns;
};

/// The seeded draw ksvd_train uses to pick its m starting columns: distinct,
/// nonzero, in draw order.
std::vector<Index> select_initial_columns(const MatD& data, std::size_t m, Rng& rng);

/// K-SVD. Starts from m distinct seeded data columns, then alternates OMP
/// coding (k atoms per column) with sequential rank-1 atom updates. The
/// representation error recorded in error_trace never increases.
Dictionary ksvd_train(const TrainSet& data, std::size_t m, std::size_t k, std::size_t iters, Rng& rng,
                      const KsvdOptions& options = {});

/// Joint training on stacked (hr/p ; lr/(2q)) vectors, split back into the
/// two halves afterwards. Only the atom matrices, sparsity and seed are set;
/// callers fill in scale and patch geometry.
CoupledDictionary coupled_train(const TrainSet& hr_patches, const TrainSet& lr_features, std::size_t m,
                                std::size_t k, std::size_t iters, Rng& rng, const KsvdOptions& options = {});

/// CDL1 binary format, little-endian:
///   "CDL1" | version u32 = 1 | m | hr_rows | lr_rows | scale | patch_size_hr |
///   overlap_hr | sparsity_k (all u32) | seed u64 | feature_spec_id (u32 length
///   + UTF-8) | d_hr f64 column-major | d_lr f64 column-major
void save_dictionary(const CoupledDictionary& cd, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dictionary(const CoupledDictionary& cd);

CoupledDictionary load_dictionary(const std::filesystem::path& path);
CoupledDictionary decode_dictionary(const std::vector<std::uint8_t>& bytes);

}  // namespace sparse_sr
