#include "sparse_sr/superres.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "sparse_sr/errors.hpp"
#include "sparse_sr/parallel.hpp"

namespace sparse_sr {

namespace {

constexpr double kZeroColumn = 1e-12;

[[noreturn]] void rethrow_at(const std::string& where)
{
    try {
        throw;
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(where + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(where + ": " + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(where + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(where + ": " + e.what());
    }
}

double residual_norm(const Raster& hr, const Raster& lr, Index scale)
{
    return (degrade(hr, scale).pixels - lr.pixels).matrix().norm();
}

}  // namespace

UpscaleConfig UpscaleConfig::for_dictionary(const std::string& name, const CoupledDictionary& cd)
{
    UpscaleConfig cfg;
    cfg.solver_name = name;
    cfg.solver_cfg = SolverConfig<double>::defaults(parse_solver_kind(name));
    cfg.solver_cfg.sparsity_k = cd.sparsity_k;
    return cfg;
}

Upscaler::Upscaler(const CoupledDictionary& cd, const UpscaleConfig& cfg) : cd_(cd), cfg_(cfg)
{
    if (cd.feature_spec_id != FeatureSpec::grad4_v1().id) {
        throw InvalidArgument("dictionary feature spec '" + cd.feature_spec_id + "' does not match built-in '" +
                              FeatureSpec::grad4_v1().id + "'");
    }
    const Index p = cd.patch_size_hr;
    if (p < 1 || cd.d_hr.rows() != p * p || cd.d_lr.rows() != 4 * p * p || cd.d_lr.cols() != cd.d_hr.cols()) {
        throw DimensionError("dictionary halves do not match patch size " + std::to_string(p));
    }
    if (cd.overlap_hr >= cd.patch_size_hr) throw InvalidArgument("overlap must be smaller than the patch size");
    if (cd.scale < 2) throw InvalidArgument("dictionary scale must be >= 2");
    cfg_.solver_cfg.kind = parse_solver_kind(cfg.solver_name);
    cfg_.solver_cfg.validate();
    if (!(cfg.range_tolerance >= 0.0 && cfg.range_tolerance < 1.0)) {
        throw InvalidArgument("range tolerance must lie in [0, 1)");
    }

    const MatD weighted = cd.d_lr * cd.lr_weight();
    std::vector<double> norms;
    for (Index j = 0; j < weighted.cols(); ++j) {
        const double n = weighted.col(j).norm();
        if (n > kZeroColumn) {
            active_.push_back(j);
            norms.push_back(n);
        }
    }
    const auto m = static_cast<Index>(active_.size());
    MatD unit(weighted.rows(), m);
    inv_norms_.resize(m);
    for (Index a = 0; a < m; ++a) {
        inv_norms_(a) = 1.0 / norms[static_cast<std::size_t>(a)];
        unit.col(a) = weighted.col(active_[static_cast<std::size_t>(a)]) * inv_norms_(a);
    }

    if (m > 0) {
        const Eigen::SelfAdjointEigenSolver<MatD> eig(unit * unit.transpose());
        const VecD& ev = eig.eigenvalues();  // ascending
        const double cutoff = cfg_.range_tolerance * ev(ev.size() - 1);
        Index first = 0;
        while (first < ev.size() && ev(first) <= cutoff) ++first;
        // descending order keeps the dominant directions first
        basis_ = eig.eigenvectors().rightCols(ev.size() - first).rowwise().reverse();
    } else {
        basis_.resize(weighted.rows(), 0);
    }
    if (rank() > 0) {
        ctx_ = std::make_unique<SolverContext<double>>(basis_.transpose() * unit, cfg_.solver_cfg.kind);
        // OMP cannot pick more atoms than the restricted system has rows
        cfg_.solver_cfg.sparsity_k = std::min<std::size_t>(cfg_.solver_cfg.sparsity_k, static_cast<std::size_t>(rank()));
    }
}

VecD Upscaler::code(const VecD& weighted_feature) const
{
    VecD alpha = VecD::Zero(cd_.atom_count());
    if (!ctx_) return alpha;
    const VecD reduced = basis_.transpose() * weighted_feature;
    const SolveResult<double> r = solve(*ctx_, reduced, cfg_.solver_cfg);
    for (std::size_t t = 0; t < r.code.indices.size(); ++t) {
        const Index a = r.code.indices[t];
        alpha(active_[static_cast<std::size_t>(a)]) = r.code.values[t] * inv_norms_(a);
    }
    return alpha;
}

Raster Upscaler::run(const Raster& lr) const
{
    const Index scale = cd_.scale;
    const Index p = cd_.patch_size_hr;
    const Index stride = cd_.stride();
    const Index out_w = lr.width() * scale;
    const Index out_h = lr.height() * scale;
    if (out_w < p || out_h < p) {
        throw InvalidArgument("input " + std::to_string(lr.width()) + "x" + std::to_string(lr.height()) +
                              " is too small for patch size " + std::to_string(p) + " at scale " +
                              std::to_string(scale));
    }

    const Raster mid = bicubic_resize(lr, out_w, out_h);
    const MatD features = lr_features(mid, p, stride) * cd_.lr_weight();
    PatchGrid grid = extract_patches(mid, p, stride);

    parallel_for(static_cast<std::size_t>(grid.count()), [&](std::size_t i) {
        const auto col = static_cast<Index>(i);
        try {
            const VecD alpha = code(features.col(col));
            const double mean = grid.patches.col(col).mean();
            grid.patches.col(col) = (cd_.d_hr * alpha).array() + mean;
        } catch (...) {
            const PatchOrigin o = grid.origins[i];
            rethrow_at("patch at (x=" + std::to_string(o.col) + ", y=" + std::to_string(o.row) + ")");
        }
    });

    Raster hr = assemble_patches(grid, out_w, out_h);
    if (cfg_.back_projection_iters > 0) hr = back_project(hr, lr, scale, cfg_.back_projection_iters);
    if (!hr.pixels.allFinite()) throw Error("reconstruction produced non-finite pixels");
    return hr;
}

Raster upscale(const Raster& lr, const CoupledDictionary& cd, const UpscaleConfig& cfg)
{
    return Upscaler(cd, cfg).run(lr);
}

Raster back_project(const Raster& hr_est, const Raster& lr, Index scale, std::size_t iters)
{
    if (iters == 0) return hr_est;
    if (hr_est.width() != lr.width() * scale || hr_est.height() != lr.height() * scale) {
        throw DimensionError("back_project: HR estimate is not scale x the LR image");
    }
    Raster hr = hr_est;
    double prev = residual_norm(hr, lr, scale);
    for (std::size_t it = 0; it < iters && prev > 0.0; ++it) {
        const Raster diff(Eigen::ArrayXXd(lr.pixels - degrade(hr, scale).pixels));
        Raster next(Eigen::ArrayXXd(hr.pixels + bicubic_resize(diff, hr.width(), hr.height()).pixels));
        const double err = residual_norm(next, lr, scale);
        if (err > prev) break;
        hr = std::move(next);
        prev = err;
    }
    return hr;
}

double mse(const Raster& a, const Raster& b)
{
    if (a.width() != b.width() || a.height() != b.height()) {
        throw DimensionError("mse: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                             std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
    if (a.pixels.size() == 0) throw DimensionError("mse: empty images");
    return (a.pixels - b.pixels).square().mean();
}

QualityReport psnr(const Raster& a, const Raster& b, double max_val)
{
    if (!(max_val > 0.0)) throw InvalidArgument("psnr: max_val must be positive");
    QualityReport q;
    q.mse = mse(a, b);
    q.psnr_db = q.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(max_val * max_val / q.mse);
    return q;
}

}  // namespace sparse_sr
