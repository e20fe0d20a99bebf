#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/errors.hpp"
#include "sparse_sr/parallel.hpp"
#include "sparse_sr/solvers.hpp"

namespace sparse_sr {

namespace {

std::uint32_t exact_sqrt(Index n, const char* what)
{
    const auto r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (r * r != n || r == 0) {
        throw DimensionError(std::string(what) + ": row count " + std::to_string(n) + " is not a positive square");
    }
    return static_cast<std::uint32_t>(r);
}

/// Dominant left singular vector of `block`, refined from `start` by power
/// iteration on block·blockᵀ. Starting from the current atom makes ‖blockᵀu‖
/// non-decreasing, so the atom update never worsens the fit.
VecD dominant_direction(const MatD& block, const VecD& start, const KsvdOptions& options)
{
    VecD u = start;
    double sigma = (block.transpose() * u).norm();
    for (std::size_t it = 0; it < options.power_max_iters; ++it) {
        VecD next = block * (block.transpose() * u);
        const double n = next.norm();
        if (n == 0.0) break;
        next /= n;
        const double next_sigma = (block.transpose() * next).norm();
        if (next_sigma < sigma) break;  // rounding noise at convergence
        const bool done = next_sigma - sigma <= options.power_tol * next_sigma;
        u = std::move(next);
        sigma = next_sigma;
        if (done) break;
    }
    return u;
}

}  // namespace

std::vector<Index> select_initial_columns(const MatD& data, std::size_t m, Rng& rng)
{
    std::vector<Index> pool(static_cast<std::size_t>(data.cols()));
    std::iota(pool.begin(), pool.end(), Index{0});
    std::vector<Index> chosen;
    std::size_t remaining = pool.size();
    while (chosen.size() < m) {
        if (remaining == 0) {
            throw InvalidArgument("ksvd_train: fewer than " + std::to_string(m) + " nonzero training columns");
        }
        const std::size_t pick = static_cast<std::size_t>(rng.index(remaining));
        const Index col = pool[pick];
        std::swap(pool[pick], pool[remaining - 1]);
        --remaining;
        if (data.col(col).norm() > 0.0) chosen.push_back(col);  // zero columns are redrawn
    }
    return chosen;
}

double CoupledDictionary::hr_weight() const { return 1.0 / static_cast<double>(exact_sqrt(d_hr.rows(), "d_hr")); }

double CoupledDictionary::lr_weight() const
{
    if (d_lr.rows() % 4 != 0) throw DimensionError("d_lr: row count is not 4q²");
    return 1.0 / (2.0 * static_cast<double>(exact_sqrt(d_lr.rows() / 4, "d_lr")));
}

double CoupledDictionary::stacked_norm_defect() const
{
    const double wh = hr_weight();
    const double wl = lr_weight();
    double worst = 0.0;
    for (Index j = 0; j < d_hr.cols(); ++j) {
        const double n = std::sqrt(wh * wh * d_hr.col(j).squaredNorm() + wl * wl * d_lr.col(j).squaredNorm());
        worst = std::max(worst, std::abs(n - 1.0));
    }
    return worst;
}

Dictionary ksvd_train(const TrainSet& data, std::size_t m, std::size_t k, std::size_t iters, Rng& rng,
                      const KsvdOptions& options)
{
    const MatD& x = data.samples;
    const Index n = x.rows();
    const Index count = x.cols();
    const auto atoms_m = static_cast<Index>(m);
    if (count < 1) throw InvalidArgument("ksvd_train: empty training set");
    if (atoms_m < 1) throw InvalidArgument("ksvd_train: need at least one atom");
    if (atoms_m > count) {
        throw InvalidArgument("ksvd_train: " + std::to_string(m) + " atoms requested but only " +
                              std::to_string(count) + " samples");
    }
    if (k < 1 || static_cast<Index>(k) > n || static_cast<Index>(k) > atoms_m) {
        throw InvalidArgument("ksvd_train: sparsity " + std::to_string(k) + " must lie in [1, min(n, m)]");
    }
    if (iters < 1) throw InvalidArgument("ksvd_train: iters must be >= 1");

    Dictionary dict;
    dict.sparsity_k = k;
    dict.train_iters = iters;
    dict.seed = rng.seed();
    const std::vector<Index> init =
        options.initial_columns.empty() ? select_initial_columns(x, m, rng) : options.initial_columns;
    if (init.size() != m) throw InvalidArgument("ksvd_train: initial_columns must list exactly m columns");
    dict.atoms.resize(n, atoms_m);
    for (Index j = 0; j < atoms_m; ++j) {
        const Index col = init[static_cast<std::size_t>(j)];
        if (col < 0 || col >= count || x.col(col).norm() == 0.0) {
            throw InvalidArgument("ksvd_train: initial column " + std::to_string(col) + " is out of range or zero");
        }
        dict.atoms.col(j) = x.col(col).normalized();
    }

    MatD codes = MatD::Zero(atoms_m, count);
    MatD residual = x;  // X − D·codes, kept in sync throughout

    SolverConfig<double> omp_cfg = SolverConfig<double>::defaults(SolverKind::omp);
    omp_cfg.sparsity_k = k;
    omp_cfg.tol = options.coding_tol;

    std::vector<VecD> fresh(static_cast<std::size_t>(count));
    for (std::size_t iter = 0; iter < iters; ++iter) {
        // Sparse coding. A column keeps its previous code if OMP does worse with
        // the updated dictionary, so the error cannot grow in this stage.
        const SolverContext<double> ctx(dict.atoms, SolverKind::omp);
        parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
            const auto col = static_cast<Index>(i);
            const VecD xi = x.col(col);
            try {
                fresh[i] = solve(ctx, xi, omp_cfg).code.to_dense();
            } catch (const SingularSystemError&) {
                fresh[i].resize(0);  // near-duplicate atoms; keep the old code
            }
        });
        for (Index i = 0; i < count; ++i) {
            const VecD& cand = fresh[static_cast<std::size_t>(i)];
            if (cand.size() == 0) continue;
            const VecD cand_res = x.col(i) - dict.atoms * cand;
            if (cand_res.squaredNorm() <= residual.col(i).squaredNorm()) {
                codes.col(i) = cand;
                residual.col(i) = cand_res;
            }
        }

        // Atom updates, in index order; each sees the atoms updated before it.
        std::vector<char> reseeded(static_cast<std::size_t>(count), 0);
        for (Index j = 0; j < atoms_m; ++j) {
            std::vector<Index> users;
            for (Index i = 0; i < count; ++i) {
                if (codes(j, i) != 0.0) users.push_back(i);
            }
            if (users.empty()) {
                Index worst = -1;
                double worst_err = 0.0;
                for (Index i = 0; i < count; ++i) {
                    if (reseeded[static_cast<std::size_t>(i)]) continue;
                    const double e = residual.col(i).squaredNorm();
                    if (e > worst_err) {
                        worst_err = e;
                        worst = i;
                    }
                }
                if (worst >= 0 && x.col(worst).norm() > 0.0) {
                    dict.atoms.col(j) = x.col(worst) / x.col(worst).norm();
                    reseeded[static_cast<std::size_t>(worst)] = 1;
                }
                continue;
            }

            const auto used = static_cast<Index>(users.size());
            MatD block(n, used);
            for (Index u = 0; u < used; ++u) {
                const Index i = users[static_cast<std::size_t>(u)];
                block.col(u) = residual.col(i) + dict.atoms.col(j) * codes(j, i);
            }
            const VecD atom = dominant_direction(block, dict.atoms.col(j), options);
            const VecD coeffs = block.transpose() * atom;
            dict.atoms.col(j) = atom;
            for (Index u = 0; u < used; ++u) {
                const Index i = users[static_cast<std::size_t>(u)];
                codes(j, i) = coeffs(u);
                residual.col(i) = block.col(u) - atom * coeffs(u);
            }
        }
        dict.error_trace.push_back(residual.norm());
    }
    return dict;
}

CoupledDictionary coupled_train(const TrainSet& hr_patches, const TrainSet& lr_features, std::size_t m,
                                std::size_t k, std::size_t iters, Rng& rng, const KsvdOptions& options)
{
    if (hr_patches.count() != lr_features.count()) {
        throw DimensionError("coupled_train: " + std::to_string(hr_patches.count()) + " HR samples vs " +
                             std::to_string(lr_features.count()) + " LR samples");
    }
    const std::uint32_t p = exact_sqrt(hr_patches.dim(), "coupled_train HR patches");
    if (lr_features.dim() % 4 != 0) {
        throw DimensionError("coupled_train: LR feature dimension " + std::to_string(lr_features.dim()) +
                             " is not 4q²");
    }
    const std::uint32_t q = exact_sqrt(lr_features.dim() / 4, "coupled_train LR features");
    const double wh = 1.0 / p;
    const double wl = 1.0 / (2.0 * q);

    const Index hr_rows = hr_patches.dim();
    const Index lr_rows = lr_features.dim();
    TrainSet stacked;
    stacked.samples.resize(hr_rows + lr_rows, hr_patches.count());
    stacked.samples.topRows(hr_rows) = wh * hr_patches.samples;
    stacked.samples.bottomRows(lr_rows) = wl * lr_features.samples;

    Dictionary joint = ksvd_train(stacked, m, k, iters, rng, options);

    CoupledDictionary cd;
    cd.d_hr = joint.atoms.topRows(hr_rows) * static_cast<double>(p);
    cd.d_lr = joint.atoms.bottomRows(lr_rows) * (2.0 * q);
    cd.patch_size_hr = p;
    cd.overlap_hr = p / 2;
    cd.sparsity_k = static_cast<std::uint32_t>(k);
    cd.seed = joint.seed;
    cd.error_trace = std::move(joint.error_trace);
    return cd;
}

}  // namespace sparse_sr
