#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparse_sr/numerics.hpp"

namespace sparse_sr {

/// Grayscale image with nominal intensities in [0, 255]. pixels(y, x).
/// Values are left unclamped until written.
struct Raster {
    Eigen::ArrayXXd pixels;

    Raster() = default;
    Raster(Index width, Index height, double fill = 0.0) : pixels(Eigen::ArrayXXd::Constant(height, width, fill)) {}
    explicit Raster(Eigen::ArrayXXd p) : pixels(std::move(p)) {}

    Index width() const { return pixels.cols(); }
    Index height() const { return pixels.rows(); }
    double& at(Index x, Index y) { return pixels(y, x); }
    double at(Index x, Index y) const { return pixels(y, x); }
    /// Edge-clamped read.
    double clamped(Index x, Index y) const
    {
        x = std::clamp<Index>(x, 0, width() - 1);
        y = std::clamp<Index>(y, 0, height() - 1);
        return pixels(y, x);
    }
};

Raster read_pgm(const std::filesystem::path& path);
Raster decode_pgm(const std::string& bytes);
void write_pgm(const Raster& raster, const std::filesystem::path& path);
/// "P5\n<w> <h>\n255\n" followed by rows of bytes, rounded half away from zero
/// and clamped to [0, 255].
std::string encode_pgm(const Raster& raster);

/// Top-left crop to the largest multiple of `scale` in each dimension.
Raster crop_to_multiple(const Raster& img, Index scale);

/// Box-average decimation. Dimensions that are not multiples of `scale` are
/// cropped first.
Raster degrade(const Raster& hr, Index scale);

/// Catmull–Rom bicubic resampling (a = −0.5), edge-clamped, pixel-center
/// aligned: source = (i + 0.5)·in/out − 0.5.
Raster bicubic_resize(const Raster& img, Index out_w, Index out_h);

struct PatchOrigin {
    Index row;
    Index col;
};

/// Patches as columns (p² rows, row-major pixel order inside each patch);
/// origins ordered row-major.
struct PatchGrid {
    Index patch_size = 0;
    Index stride = 0;
    Index image_width = 0;
    Index image_height = 0;
    std::vector<PatchOrigin> origins;
    MatD patches;

    Index count() const { return static_cast<Index>(origins.size()); }
};

/// Patch origins along one axis: 0, s, 2s, … plus a final origin flush with
/// the far edge when (len − p) is not a multiple of s.
std::vector<Index> patch_positions(Index len, Index p, Index stride);

PatchGrid extract_patches(const Raster& img, Index p, Index stride);

/// Uniform average of every patch value landing on each pixel.
Raster assemble_patches(const PatchGrid& grid, Index out_w, Index out_h);

/// Four derivative filters applied to the mid-resolution image.
struct FeatureSpec {
    std::string id;
    /// 1-D taps; vertical[i] applies taps[i] along y instead of x.
    std::array<std::vector<double>, 4> taps;
    std::array<bool, 4> vertical;

    static const FeatureSpec& grad4_v1();
};

/// Correlates img with one 1-D kernel along x or y (edge clamped).
Raster filter_response(const Raster& img, const std::vector<double>& taps, bool vertical);

/// 4p² × patch-count matrix: the four filter responses' co-located p×p
/// patches stacked in filter order.
MatD lr_features(const Raster& mid, Index p, Index stride, const FeatureSpec& spec = FeatureSpec::grad4_v1());

}  // namespace sparse_sr
