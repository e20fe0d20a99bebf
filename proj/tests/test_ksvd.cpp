#include "doctest.h"

#include <numeric>

#include "oracles.hpp"
#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/errors.hpp"

using namespace sparse_sr;

namespace {

bool non_increasing(const std::vector<double>& trace, double slack)
{
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] > trace[i - 1] + slack) return false;
    }
    return true;
}

TrainSet planted_samples(const MatD& truth, Index count, Index k, Rng& rng)
{
    TrainSet ts;
    ts.samples.resize(truth.rows(), count);
    for (Index i = 0; i < count; ++i) {
        ts.samples.col(i) = truth * oracle::planted_code(truth.cols(), k, rng);
    }
    return ts;
}

}  // namespace

TEST_CASE("one-sparse data recovers the identity atoms")
{
    Rng rng(1);
    TrainSet ts;
    ts.samples = MatD::Zero(8, 200);
    for (Index i = 0; i < 200; ++i) {
        ts.samples(static_cast<Index>(rng.index(8)), i) = rng.uniform(1.0, 2.0);
    }
    Rng train_rng(0);
    const Dictionary d = ksvd_train(ts, 8, 1, 10, train_rng);
    CHECK(oracle::atom_match_rate(d.atoms, MatD::Identity(8, 8), 0.99) == 1.0);
    CHECK(non_increasing(d.error_trace, 1e-9));
    CHECK(d.error_trace.back() <= 1e-9);
}

TEST_CASE("planted 20x50 dictionary is recovered")
{
    Rng rng(2024);
    const MatD truth = oracle::gaussian_unit_columns(20, 50, rng);
    const TrainSet ts = planted_samples(truth, 1500, 3, rng);
    Rng train_rng(7);
    const Dictionary d = ksvd_train(ts, 50, 3, 30, train_rng);
    CHECK(oracle::atom_match_rate(d.atoms, truth, 0.97) >= 0.8);
    CHECK(non_increasing(d.error_trace, 1e-9));
    for (Index j = 0; j < d.atoms.cols(); ++j) CHECK(std::abs(d.atoms.col(j).norm() - 1.0) <= 1e-10);
}

TEST_CASE("error trace never increases on unstructured data")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        TrainSet ts;
        ts.samples.resize(12, 150);
        for (Index i = 0; i < ts.samples.size(); ++i) ts.samples.data()[i] = rng.normal();
        const Dictionary d = ksvd_train(ts, 24, 2, 8, rng);
        CHECK(d.error_trace.size() == 8);
        CHECK(non_increasing(d.error_trace, 1e-9));
    }
}

TEST_CASE("training is deterministic for a fixed seed")
{
    Rng data_rng(3);
    const MatD truth = oracle::gaussian_unit_columns(10, 20, data_rng);
    const TrainSet ts = planted_samples(truth, 300, 2, data_rng);
    Rng a(99), b(99);
    const Dictionary da = ksvd_train(ts, 20, 2, 5, a);
    const Dictionary db = ksvd_train(ts, 20, 2, 5, b);
    CHECK(da.atoms == db.atoms);
    CHECK(da.error_trace == db.error_trace);
    CHECK(da.seed == 99);
}

TEST_CASE("zero columns are skipped at initialization")
{
    TrainSet ts;
    ts.samples = MatD::Zero(4, 6);
    ts.samples.col(1) << 1, 0, 0, 0;
    ts.samples.col(4) << 0, 2, 0, 0;
    ts.samples.col(5) << 0, 0, 3, 0;
    Rng rng(0);
    const Dictionary d = ksvd_train(ts, 3, 1, 2, rng);
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(d.atoms.col(j).norm() - 1.0) <= 1e-12);

    Rng rng2(0);
    CHECK_THROWS_AS(ksvd_train(ts, 4, 1, 2, rng2), InvalidArgument);
}

TEST_CASE("ksvd argument errors")
{
    TrainSet ts;
    ts.samples = MatD::Ones(4, 5);
    Rng rng(0);
    CHECK_THROWS_AS(ksvd_train(ts, 6, 1, 1, rng), InvalidArgument);  // m > N
    CHECK_THROWS_AS(ksvd_train(ts, 3, 5, 1, rng), InvalidArgument);  // k > n
    CHECK_THROWS_AS(ksvd_train(ts, 3, 1, 0, rng), InvalidArgument);
}

TEST_CASE("coupled training with identical halves gives identical dictionaries")
{
    Rng rng(5);
    // p² = 4q² with p = 4, q = 2
    const MatD truth = oracle::gaussian_unit_columns(16, 24, rng);
    const TrainSet hr = planted_samples(truth, 200, 2, rng);
    Rng train_rng(1);
    const CoupledDictionary cd = coupled_train(hr, hr, 24, 2, 5, train_rng);
    CHECK(cd.d_hr.rows() == 16);
    CHECK(cd.d_lr.rows() == 16);
    CHECK((cd.d_hr - cd.d_lr).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(cd.stacked_norm_defect() <= 1e-10);
    CHECK(cd.patch_size_hr == 4);
}

TEST_CASE("coupled training rejects mismatched inputs")
{
    TrainSet hr, lr;
    hr.samples = MatD::Ones(16, 100);
    lr.samples = MatD::Ones(16, 101);
    Rng rng(0);
    CHECK_THROWS_AS(coupled_train(hr, lr, 10, 1, 1, rng), DimensionError);
    lr.samples = MatD::Ones(15, 100);
    CHECK_THROWS_AS(coupled_train(hr, lr, 10, 1, 1, rng), DimensionError);
    hr.samples = MatD::Ones(15, 100);
    lr.samples = MatD::Ones(16, 100);
    CHECK_THROWS_AS(coupled_train(hr, lr, 10, 1, 1, rng), DimensionError);
}

namespace {

struct CoupledPlant {
    MatD stacked;  // unit-norm stacked truth
    TrainSet hr;
    TrainSet lr;
};

CoupledPlant make_coupled_plant(std::uint64_t seed, Index count)
{
    constexpr Index p = 5;
    constexpr Index q = 3;
    Rng rng(seed);
    CoupledPlant plant;
    plant.stacked = oracle::gaussian_unit_columns(p * p + 4 * q * q, 50, rng);
    const MatD d_hr = plant.stacked.topRows(p * p) * double(p);
    const MatD d_lr = plant.stacked.bottomRows(4 * q * q) * double(2 * q);
    plant.hr.samples.resize(p * p, count);
    plant.lr.samples.resize(4 * q * q, count);
    for (Index i = 0; i < count; ++i) {
        const VecD a = oracle::planted_code(50, 2, rng);
        plant.hr.samples.col(i) = d_hr * a;
        plant.lr.samples.col(i) = d_lr * a;
    }
    return plant;
}

MatD stack(const CoupledDictionary& cd)
{
    MatD s(cd.d_hr.rows() + cd.d_lr.rows(), cd.d_hr.cols());
    s.topRows(cd.d_hr.rows()) = cd.d_hr * cd.hr_weight();
    s.bottomRows(cd.d_lr.rows()) = cd.d_lr * cd.lr_weight();
    return s;
}

}  // namespace

TEST_CASE("planted coupled dictionary is recovered, and column order barely matters")
{
    const CoupledPlant plant = make_coupled_plant(31, 2000);
    Rng rng(4);
    const CoupledDictionary cd = coupled_train(plant.hr, plant.lr, 50, 2, 30, rng);
    const double rate = oracle::atom_match_rate(stack(cd), plant.stacked, 0.97);
    CHECK(rate >= 0.8);
    CHECK(cd.stacked_norm_defect() <= 1e-10);
    CHECK(non_increasing(cd.error_trace, 1e-9));

    // shuffle the samples but start from the same original columns
    std::vector<Index> perm(2000);
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng shuffle(17);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[shuffle.index(i + 1)]);
    std::vector<Index> where(2000);
    for (std::size_t i = 0; i < perm.size(); ++i) where[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);

    MatD stacked_samples(plant.hr.dim() + plant.lr.dim(), 2000);
    stacked_samples << plant.hr.samples / 5.0, plant.lr.samples / 6.0;
    Rng init_rng(4);
    KsvdOptions opts;
    for (Index c : select_initial_columns(stacked_samples, 50, init_rng)) {
        opts.initial_columns.push_back(where[static_cast<std::size_t>(c)]);
    }
    TrainSet hr_p, lr_p;
    hr_p.samples = plant.hr.samples(Eigen::all, perm);
    lr_p.samples = plant.lr.samples(Eigen::all, perm);
    Rng rng2(4);
    const CoupledDictionary cd_p = coupled_train(hr_p, lr_p, 50, 2, 30, rng2, opts);
    const double rate_p = oracle::atom_match_rate(stack(cd_p), plant.stacked, 0.97);
    INFO("rate " << rate << " permuted " << rate_p);
    CHECK(std::abs(rate - rate_p) <= 0.05);
}
