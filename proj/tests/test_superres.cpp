#include "doctest.h"

#include <cmath>
#include <limits>

#include "instances.hpp"
#include "oracles.hpp"
#include "sparse_sr/errors.hpp"
#include "sparse_sr/superres.hpp"

using namespace sparse_sr;

namespace {

UpscaleConfig tight_config(const std::string& name, const CoupledDictionary& cd)
{
    UpscaleConfig cfg = UpscaleConfig::for_dictionary(name, cd);
    if (name == "ista" || name == "qp") {
        cfg.solver_cfg.lambda = 1e-6;
        cfg.solver_cfg.max_iters = 50000;
        cfg.solver_cfg.tol = 1e-13;
    }
    return cfg;
}

CoupledDictionary random_dictionary(Index p, Index m, std::uint64_t seed)
{
    Rng rng(seed);
    const MatD stacked = oracle::gaussian_unit_columns(5 * p * p, m, rng);
    CoupledDictionary cd;
    cd.patch_size_hr = static_cast<std::uint32_t>(p);
    cd.overlap_hr = static_cast<std::uint32_t>(p / 2);
    cd.sparsity_k = 2;
    cd.d_hr = stacked.topRows(p * p) * double(p);
    cd.d_lr = stacked.bottomRows(4 * p * p) * double(2 * p);
    return cd;
}

Raster random_raster(Index w, Index h, std::uint64_t seed)
{
    Rng rng(seed);
    Raster r(w, h);
    for (Index i = 0; i < r.pixels.size(); ++i) r.pixels.data()[i] = rng.uniform(0.0, 255.0);
    return r;
}

}  // namespace

TEST_CASE("planted instance is rebuilt exactly by every solver")
{
    const instance::Planted inst = instance::planted_from_image(32, 8, 11);
    CHECK(inst.cd.stacked_norm_defect() <= 1e-10);
    for (const char* name : {"omp", "ista", "sl0", "qp"}) {
        CAPTURE(name);
        const Upscaler up(inst.cd, tight_config(name, inst.cd));
        CHECK(up.rank() == 32);
        const Raster out = up.run(inst.lr);
        REQUIRE(out.width() == 32);
        const double err = (out.pixels - inst.hr.pixels).abs().maxCoeff();
        CHECK(err <= (std::string(name) == "omp" ? 1e-6 : 1e-3));
    }
}

TEST_CASE("constant LR image gives a constant HR image")
{
    const CoupledDictionary cd = random_dictionary(4, 100, 1);
    for (const char* name : {"omp", "ista", "sl0", "qp"}) {
        const Raster out = upscale(Raster(10, 8, 77.0), cd, UpscaleConfig::for_dictionary(name, cd));
        CHECK(out.width() == 20);
        CHECK(out.height() == 16);
        CHECK((out.pixels - 77.0).abs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("output dimensions are scale times the input, for any solver")
{
    const CoupledDictionary cd = random_dictionary(4, 120, 2);
    const Raster lr = random_raster(64, 64, 3);
    for (const char* name : {"omp", "ista", "sl0", "qp"}) {
        UpscaleConfig cfg = UpscaleConfig::for_dictionary(name, cd);
        cfg.solver_cfg.max_iters = 50;
        const Raster out = upscale(lr, cd, cfg);
        CHECK(out.width() == 128);
        CHECK(out.height() == 128);
        CHECK(out.pixels.allFinite());
    }
}

TEST_CASE("upscale is deterministic")
{
    const CoupledDictionary cd = random_dictionary(4, 80, 4);
    const Raster lr = random_raster(20, 14, 5);
    for (const char* name : {"omp", "sl0"}) {
        const UpscaleConfig cfg = UpscaleConfig::for_dictionary(name, cd);
        CHECK((upscale(lr, cd, cfg).pixels == upscale(lr, cd, cfg).pixels).all());
    }
}

TEST_CASE("upscale rejects bad dictionaries and configurations")
{
    CoupledDictionary cd = random_dictionary(4, 60, 6);
    const Raster lr = random_raster(8, 8, 7);
    cd.feature_spec_id = "grad2-v9";
    CHECK_THROWS_AS(upscale(lr, cd, UpscaleConfig::for_dictionary("omp", cd)), InvalidArgument);
    cd.feature_spec_id = kFeatureSpecId;
    UpscaleConfig cfg = UpscaleConfig::for_dictionary("omp", cd);
    cfg.solver_name = "lasso";
    CHECK_THROWS_AS(upscale(lr, cd, cfg), InvalidArgument);
    CHECK_THROWS_AS(upscale(Raster(1, 1), cd, UpscaleConfig::for_dictionary("omp", cd)), InvalidArgument);
}

TEST_CASE("back-projection")
{
    const Raster lr = random_raster(16, 16, 8);
    const Raster hr = random_raster(32, 32, 9);
    CHECK((back_project(hr, lr, 2, 0).pixels == hr.pixels).all());

    // already consistent: a block-constant upsampling of lr
    Raster consistent(32, 32);
    for (Index y = 0; y < 32; ++y) {
        for (Index x = 0; x < 32; ++x) consistent.at(x, y) = lr.at(x / 2, y / 2);
    }
    CHECK((back_project(consistent, lr, 2, 5).pixels - consistent.pixels).abs().maxCoeff() <= 1e-12);

    const auto residual = [&](const Raster& h) { return (degrade(h, 2).pixels - lr.pixels).matrix().norm(); };
    const Raster refined = back_project(hr, lr, 2, 10);
    CHECK(residual(refined) <= 0.5 * residual(hr));

    // independent run of the same iteration
    Raster ref = hr;
    double prev = residual(ref);
    for (int it = 0; it < 10; ++it) {
        Eigen::ArrayXXd d = lr.pixels - degrade(ref, 2).pixels;
        Raster next(Eigen::ArrayXXd(ref.pixels + bicubic_resize(Raster(d), 32, 32).pixels));
        CHECK(residual(next) <= prev);
        prev = residual(next);
        ref = next;
    }
    CHECK((ref.pixels - refined.pixels).abs().maxCoeff() <= 1e-9);
    CHECK_THROWS_AS(back_project(Raster(30, 32), lr, 2, 1), DimensionError);
}

TEST_CASE("mse and psnr")
{
    const Raster a = random_raster(5, 4, 10);
    CHECK(mse(a, a) == 0.0);
    CHECK(std::isinf(psnr(a, a).psnr_db));
    CHECK(psnr(a, a).psnr_db > 0);

    Raster b = a;
    b.pixels += 2.0;
    CHECK(mse(a, b) == doctest::Approx(4.0));

    b.pixels = a.pixels + 1.0;
    CHECK(std::abs(psnr(a, b).psnr_db - 48.1308036086791) <= 1e-9);
    CHECK(std::abs(psnr(a, b).psnr_db - 48.1308) < 5e-5);
    b.pixels = a.pixels + 255.0;
    CHECK(std::abs(psnr(a, b).psnr_db) <= 1e-12);

    // symmetric, and decreasing in mse
    const Raster c = random_raster(5, 4, 11);
    CHECK(psnr(a, c).psnr_db == psnr(c, a).psnr_db);
    const double near = psnr(a, Raster(Eigen::ArrayXXd(a.pixels + 0.5))).psnr_db;
    const double far = psnr(a, Raster(Eigen::ArrayXXd(a.pixels + 3.0))).psnr_db;
    CHECK(near > far);

    CHECK_THROWS_AS(mse(a, Raster(4, 5)), DimensionError);
    CHECK_THROWS_AS(psnr(a, Raster(5, 5)), DimensionError);
}
