#include "sparse_sr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sparse_sr/errors.hpp"

namespace sparse_sr {

namespace {

/// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos)
{
    for (;;) {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
}

Index parse_dim(const std::string& token, const char* what)
{
    if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw FormatError(std::string("PGM: bad ") + what + " '" + token + "'");
    }
    return static_cast<Index>(std::stoll(token));
}

std::uint8_t to_byte(double v)
{
    // std::round rounds halves away from zero
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

double catmull_rom(double t)
{
    t = std::abs(t);
    constexpr double a = -0.5;
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

struct Taps {
    std::array<Index, 4> index;
    std::array<double, 4> weight;
};

/// Four source taps for each output position along one axis.
std::vector<Taps> resample_taps(Index in, Index out)
{
    std::vector<Taps> taps(static_cast<std::size_t>(out));
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (Index i = 0; i < out; ++i) {
        const double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        const double base = std::floor(src);
        const double frac = src - base;
        Taps& t = taps[static_cast<std::size_t>(i)];
        for (int k = 0; k < 4; ++k) {
            t.index[k] = std::clamp<Index>(static_cast<Index>(base) - 1 + k, 0, in - 1);
            t.weight[k] = catmull_rom(frac - (k - 1));
        }
    }
    return taps;
}

}  // namespace

Raster decode_pgm(const std::string& bytes)
{
    std::size_t pos = 0;
    const std::string magic = next_token(bytes, pos);
    if (magic != "P5") throw FormatError("PGM: unsupported magic '" + magic + "' (only binary P5)");
    const Index w = parse_dim(next_token(bytes, pos), "width");
    const Index h = parse_dim(next_token(bytes, pos), "height");
    const Index maxval = parse_dim(next_token(bytes, pos), "maxval");
    if (w < 1 || h < 1) throw FormatError("PGM: empty image");
    if (maxval != 255) throw FormatError("PGM: maxval " + std::to_string(maxval) + " unsupported (need 255)");
    if (pos >= bytes.size()) throw FormatError("PGM: missing pixel data");
    ++pos;  // single whitespace byte after maxval
    const auto need = static_cast<std::size_t>(w * h);
    if (bytes.size() - pos < need) {
        throw FormatError("PGM: short pixel data (" + std::to_string(bytes.size() - pos) + " of " +
                          std::to_string(need) + " bytes)");
    }
    Raster r(w, h);
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            r.at(x, y) = static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(y * w + x)]);
        }
    }
    return r;
}

Raster read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_pgm(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string encode_pgm(const Raster& raster)
{
    std::string out = "P5\n" + std::to_string(raster.width()) + " " + std::to_string(raster.height()) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(raster.width() * raster.height()));
    for (Index y = 0; y < raster.height(); ++y) {
        for (Index x = 0; x < raster.width(); ++x) out.push_back(static_cast<char>(to_byte(raster.at(x, y))));
    }
    return out;
}

void write_pgm(const Raster& raster, const std::filesystem::path& path)
{
    const std::string bytes = encode_pgm(raster);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Raster crop_to_multiple(const Raster& img, Index scale)
{
    if (scale < 1) throw InvalidArgument("scale must be positive");
    const Index w = img.width() / scale * scale;
    const Index h = img.height() / scale * scale;
    if (w == 0 || h == 0) {
        throw InvalidArgument("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                              " is smaller than scale " + std::to_string(scale));
    }
    return Raster(Eigen::ArrayXXd(img.pixels.topLeftCorner(h, w)));
}

Raster degrade(const Raster& hr, Index scale)
{
    if (scale < 2) throw InvalidArgument("degrade: scale must be >= 2");
    const Raster src = crop_to_multiple(hr, scale);
    const Index w = src.width() / scale;
    const Index h = src.height() / scale;
    Raster out(w, h);
    const double inv = 1.0 / static_cast<double>(scale * scale);
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            out.at(x, y) = src.pixels.block(y * scale, x * scale, scale, scale).sum() * inv;
        }
    }
    return out;
}

Raster bicubic_resize(const Raster& img, Index out_w, Index out_h)
{
    if (out_w < 1 || out_h < 1) throw InvalidArgument("bicubic_resize: output dimensions must be positive");
    const auto xt = resample_taps(img.width(), out_w);
    const auto yt = resample_taps(img.height(), out_h);

    // horizontal pass, then vertical
    Eigen::ArrayXXd tmp(img.height(), out_w);
    for (Index y = 0; y < img.height(); ++y) {
        for (Index x = 0; x < out_w; ++x) {
            const Taps& t = xt[static_cast<std::size_t>(x)];
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += t.weight[k] * img.pixels(y, t.index[k]);
            tmp(y, x) = acc;
        }
    }
    Raster out(out_w, out_h);
    for (Index y = 0; y < out_h; ++y) {
        const Taps& t = yt[static_cast<std::size_t>(y)];
        for (Index x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += t.weight[k] * tmp(t.index[k], x);
            out.at(x, y) = acc;
        }
    }
    return out;
}

std::vector<Index> patch_positions(Index len, Index p, Index stride)
{
    std::vector<Index> pos;
    for (Index o = 0; o + p <= len; o += stride) pos.push_back(o);
    if (pos.back() + p < len) pos.push_back(len - p);
    return pos;
}

PatchGrid extract_patches(const Raster& img, Index p, Index stride)
{
    if (p < 1 || p > img.width() || p > img.height()) {
        throw InvalidArgument("extract_patches: patch size " + std::to_string(p) + " does not fit a " +
                              std::to_string(img.width()) + "x" + std::to_string(img.height()) + " image");
    }
    if (stride < 1 || stride > p) throw InvalidArgument("extract_patches: stride must lie in [1, patch size]");

    PatchGrid grid;
    grid.patch_size = p;
    grid.stride = stride;
    grid.image_width = img.width();
    grid.image_height = img.height();
    for (Index r : patch_positions(img.height(), p, stride)) {
        for (Index c : patch_positions(img.width(), p, stride)) grid.origins.push_back({r, c});
    }
    grid.patches.resize(p * p, grid.count());
    for (Index i = 0; i < grid.count(); ++i) {
        const PatchOrigin o = grid.origins[static_cast<std::size_t>(i)];
        for (Index dy = 0; dy < p; ++dy) {
            for (Index dx = 0; dx < p; ++dx) grid.patches(dy * p + dx, i) = img.pixels(o.row + dy, o.col + dx);
        }
    }
    return grid;
}

Raster assemble_patches(const PatchGrid& grid, Index out_w, Index out_h)
{
    const Index p = grid.patch_size;
    if (grid.patches.rows() != p * p || grid.patches.cols() != grid.count()) {
        throw DimensionError("assemble_patches: patch matrix does not match the grid");
    }
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(out_h, out_w);
    Eigen::ArrayXXi hits = Eigen::ArrayXXi::Zero(out_h, out_w);
    for (Index i = 0; i < grid.count(); ++i) {
        const PatchOrigin o = grid.origins[static_cast<std::size_t>(i)];
        if (o.row < 0 || o.col < 0 || o.row + p > out_h || o.col + p > out_w) {
            throw DimensionError("assemble_patches: patch " + std::to_string(i) + " lies outside the output");
        }
        for (Index dy = 0; dy < p; ++dy) {
            for (Index dx = 0; dx < p; ++dx) {
                sum(o.row + dy, o.col + dx) += grid.patches(dy * p + dx, i);
                hits(o.row + dy, o.col + dx) += 1;
            }
        }
    }
    for (Index y = 0; y < out_h; ++y) {
        for (Index x = 0; x < out_w; ++x) {
            if (hits(y, x) == 0) {
                throw CoverageError("assemble_patches: pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                    ") is not covered by any patch");
            }
        }
    }
    return Raster(Eigen::ArrayXXd(sum / hits.cast<double>()));
}

const FeatureSpec& FeatureSpec::grad4_v1()
{
    static const FeatureSpec spec{
        "grad4-v1",
        {std::vector<double>{-1, 0, 1}, std::vector<double>{-1, 0, 1}, std::vector<double>{1, 0, -2, 0, 1},
         std::vector<double>{1, 0, -2, 0, 1}},
        {false, true, false, true},
    };
    return spec;
}

Raster filter_response(const Raster& img, const std::vector<double>& taps, bool vertical)
{
    const auto half = static_cast<Index>(taps.size() / 2);
    Raster out(img.width(), img.height());
    for (Index y = 0; y < img.height(); ++y) {
        for (Index x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < taps.size(); ++k) {
                const Index off = static_cast<Index>(k) - half;
                acc += taps[k] * (vertical ? img.clamped(x, y + off) : img.clamped(x + off, y));
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

MatD lr_features(const Raster& mid, Index p, Index stride, const FeatureSpec& spec)
{
    MatD features;
    for (std::size_t f = 0; f < spec.taps.size(); ++f) {
        const Raster resp = filter_response(mid, spec.taps[f], spec.vertical[f]);
        const PatchGrid grid = extract_patches(resp, p, stride);
        if (f == 0) features.resize(4 * p * p, grid.count());
        features.middleRows(static_cast<Index>(f) * p * p, p * p) = grid.patches;
    }
    return features;
}

}  // namespace sparse_sr
