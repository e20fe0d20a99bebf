#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/image.hpp"
#include "sparse_sr/solvers.hpp"

namespace sparse_sr {

struct UpscaleConfig {
    std::string solver_name = "omp";
    SolverConfig<double> solver_cfg;
    std::size_t back_projection_iters = 0;
    /// Eigenvalues of the unit-column LR Gram matrix below this fraction of
    /// the largest are treated as outside its column space.
    double range_tolerance = 1e-6;

    /// Solver defaults for `name` with the dictionary's trained sparsity.
    static UpscaleConfig for_dictionary(const std::string& name, const CoupledDictionary& cd);
};

struct QualityReport {
    double mse = 0.0;
    /// +infinity when mse is zero.
    double psnr_db = 0.0;
};

/// Per-dictionary state for repeated reconstructions.
///
/// Patches are coded against the LR half in its stacked weighting
/// d_lr/(2q), with two conditioning steps: columns are rescaled to unit norm
/// (codes are mapped back afterwards), and the system is restricted to the
/// column space of that matrix. Gradient features of an interpolated image
/// span far fewer than 4p² dimensions, so without the restriction DDᵀ is
/// singular.
class Upscaler {
public:
    Upscaler(const CoupledDictionary& cd, const UpscaleConfig& cfg);

    Raster run(const Raster& lr) const;

    /// Code for one feature column (already divided by 2q), in d_hr's atom
    /// indexing.
    VecD code(const VecD& weighted_feature) const;

    /// Dimension of the column space the LR system was restricted to.
    Index rank() const { return basis_.cols(); }

private:
    CoupledDictionary cd_;
    UpscaleConfig cfg_;
    std::vector<Index> active_;  // atoms with a nonzero LR half
    VecD inv_norms_;             // 1/‖column‖ of the weighted LR half, per active atom
    MatD basis_;                 // orthonormal basis of the LR column space
    std::unique_ptr<SolverContext<double>> ctx_;
};

/// Bicubic mid image → gradient features → per-patch sparse code → HR patch
/// (d_hr·α plus the mid patch mean) → overlap-averaged assembly, then
/// optional back-projection. Output is scale × the input dimensions.
Raster upscale(const Raster& lr, const CoupledDictionary& cd, const UpscaleConfig& cfg);

/// hr ← hr + bicubic(lr − degrade(hr)) repeated `iters` times, stopping early
/// if the LR residual would grow.
Raster back_project(const Raster& hr_est, const Raster& lr, Index scale, std::size_t iters);

double mse(const Raster& a, const Raster& b);
QualityReport psnr(const Raster& a, const Raster& b, double max_val = 255.0);

}  // namespace sparse_sr
