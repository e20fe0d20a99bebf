#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "sparse_sr/errors.hpp"
#include "sparse_sr/numerics.hpp"

namespace sparse_sr {

enum class SolverKind { omp, ista, sl0, qp };

inline constexpr std::string_view kSolverNames = "omp|ista|sl0|qp";

inline std::string_view to_string(SolverKind kind)
{
    switch (kind) {
    case SolverKind::omp: return "omp";
    case SolverKind::ista: return "ista";
    case SolverKind::sl0: return "sl0";
    case SolverKind::qp: return "qp";
    }
    return "?";
}

/// Case-insensitive lookup; unknown names list the valid choices.
inline SolverKind parse_solver_kind(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "omp") return SolverKind::omp;
    if (lower == "ista") return SolverKind::ista;
    if (lower == "sl0") return SolverKind::sl0;
    if (lower == "qp") return SolverKind::qp;
    throw InvalidArgument("unknown solver '" + std::string(name) + "' (valid: " + std::string(kSolverNames) + ")");
}

/// Sparse coefficient vector: strictly increasing indices, nonzero values.
template <typename Scalar>
struct SparseCode {
    Index dim = 0;
    std::vector<Index> indices;
    std::vector<Scalar> values;

    std::size_t nnz() const { return indices.size(); }

    Vec<Scalar> to_dense() const
    {
        Vec<Scalar> out = Vec<Scalar>::Zero(dim);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            out(indices[i]) = values[i];
        }
        return out;
    }

    /// Keeps entries with |v| >= threshold; exact zeros are always dropped.
    static SparseCode from_dense(const Vec<Scalar>& dense, Scalar threshold = Scalar(0))
    {
        SparseCode code;
        code.dim = dense.size();
        for (Index i = 0; i < dense.size(); ++i) {
            const Scalar v = dense(i);
            if (v != Scalar(0) && std::abs(v) >= threshold) {
                code.indices.push_back(i);
                code.values.push_back(v);
            }
        }
        return code;
    }
};

template <typename Scalar>
struct SolverConfig {
    SolverKind kind = SolverKind::omp;
    std::size_t sparsity_k = 3;
    Scalar lambda = Scalar(0.1);
    std::size_t max_iters = 1000;
    Scalar tol = Scalar(1e-6);
    Scalar sl0_sigma_decay = Scalar(0.5);
    std::size_t sl0_inner_steps = 3;
    Scalar sl0_mu = Scalar(2.0);

    static SolverConfig defaults(SolverKind kind)
    {
        SolverConfig cfg;
        cfg.kind = kind;
        switch (kind) {
        case SolverKind::omp:
            cfg.tol = Scalar(1e-6);
            break;
        case SolverKind::ista:
            cfg.lambda = Scalar(0.1);
            cfg.max_iters = 1000;
            cfg.tol = Scalar(1e-8);
            break;
        case SolverKind::sl0:
            // tol is the final smoothing width
            cfg.tol = Scalar(1e-6);
            break;
        case SolverKind::qp:
            cfg.lambda = Scalar(0.1);
            cfg.max_iters = 2000;
            cfg.tol = Scalar(1e-8);
            break;
        }
        return cfg;
    }

    void validate() const
    {
        if (!(lambda >= Scalar(0))) throw InvalidArgument("lambda must be >= 0");
        if (!(tol > Scalar(0))) throw InvalidArgument("tol must be > 0");
        if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
        if (!(sl0_sigma_decay > Scalar(0) && sl0_sigma_decay < Scalar(1))) {
            throw InvalidArgument("sl0_sigma_decay must lie in (0, 1)");
        }
        if (!(sl0_mu > Scalar(0))) throw InvalidArgument("sl0_mu must be > 0");
        if (sl0_inner_steps < 1) throw InvalidArgument("sl0_inner_steps must be >= 1");
    }
};

template <typename Scalar>
struct SolveStats {
    std::size_t iterations_used = 0;
    Scalar final_residual_norm = Scalar(0);
    /// ISTA/QP: objective after every iteration.
    std::vector<Scalar> objective_trace;
    /// OMP: residual norm after every iteration and atoms in selection order.
    std::vector<Scalar> residual_trace;
    std::vector<Index> selection_order;
};

template <typename Scalar>
struct SolveResult {
    SparseCode<Scalar> code;
    SolveStats<Scalar> stats;
};

inline constexpr double kIstaPruneThreshold = 1e-12;
inline constexpr double kSl0RelativePrune = 1e-9;
inline constexpr double kLipschitzSafety = 1e-3;
inline constexpr std::size_t kLipschitzPowerIters = 500;

template <typename Scalar>
Scalar soft_threshold(Scalar v, Scalar t)
{
    const Scalar mag = std::abs(v) - t;
    if (mag <= Scalar(0)) {
        return Scalar(0);
    }
    return v < Scalar(0) ? -mag : mag;
}

/// ½‖x − Dα‖² + λ‖α‖₁.
template <typename Scalar>
Scalar lasso_objective(const Mat<Scalar>& dict, const Vec<Scalar>& x, const Vec<Scalar>& alpha, Scalar lambda)
{
    return Scalar(0.5) * (x - dict * alpha).squaredNorm() + lambda * alpha.template lpNorm<1>();
}

/// Per-dictionary precomputation shared by many solves against the same D:
/// the Lipschitz constant for ISTA/QP and the DDᵀ factor for SL0. Immutable
/// after construction, so one context may serve concurrent solves.
template <typename Scalar>
class SolverContext {
public:
    SolverContext(Mat<Scalar> dict, SolverKind kind) : dict_(std::move(dict)), kind_(kind)
    {
        switch (kind_) {
        case SolverKind::ista:
        case SolverKind::qp: {
            Rng rng(0);
            lipschitz_ = spectral_norm_sq(dict_, kLipschitzPowerIters, rng) * Scalar(1 + kLipschitzSafety);
            break;
        }
        case SolverKind::sl0: {
            if (dict_.rows() > dict_.cols()) {
                throw InvalidArgument("sl0: dictionary must have at least as many atoms as rows");
            }
            const Mat<Scalar> ddt = dict_ * dict_.transpose();
            const GramCholesky<Scalar> chol(ddt);
            // (DDᵀ)⁻¹D, transposed: α ↦ α − P(Dα − x) projects onto {Dα = x}.
            projector_ = chol.solve_matrix(dict_).transpose();
            break;
        }
        case SolverKind::omp:
            break;
        }
    }

    const Mat<Scalar>& dictionary() const { return dict_; }
    SolverKind kind() const { return kind_; }
    Scalar lipschitz() const { return lipschitz_; }
    const Mat<Scalar>& projector() const { return projector_; }

private:
    Mat<Scalar> dict_;
    SolverKind kind_;
    Scalar lipschitz_ = Scalar(0);
    Mat<Scalar> projector_;
};

namespace detail {

template <typename Scalar>
void check_measurement(const Mat<Scalar>& dict, const Vec<Scalar>& x)
{
    if (dict.rows() != x.size()) {
        throw DimensionError("solver: dictionary has " + std::to_string(dict.rows()) +
                             " rows but measurement has length " + std::to_string(x.size()));
    }
}

template <typename Scalar>
SolveResult<Scalar> omp(const SolverContext<Scalar>& ctx, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    const Mat<Scalar>& dict = ctx.dictionary();
    check_measurement(dict, x);
    const std::size_t limit = static_cast<std::size_t>(std::min(dict.rows(), dict.cols()));
    if (cfg.sparsity_k > limit) {
        throw InvalidArgument("omp: sparsity " + std::to_string(cfg.sparsity_k) + " exceeds min(rows, cols) = " +
                              std::to_string(limit));
    }

    SolveResult<Scalar> result;
    result.code.dim = dict.cols();
    const Scalar x_norm = x.norm();
    if (x_norm == Scalar(0)) {
        return result;
    }

    std::vector<Index> support;
    std::vector<char> selected(static_cast<std::size_t>(dict.cols()), 0);
    GramCholesky<Scalar> chol;
    Vec<Scalar> residual = x;
    Vec<Scalar> coeffs;
    Scalar r_norm = x_norm;

    while (support.size() < cfg.sparsity_k && r_norm > cfg.tol * x_norm) {
        const Vec<Scalar> corr = dict.transpose() * residual;
        Index best = -1;
        Scalar best_mag = Scalar(0);
        for (Index j = 0; j < corr.size(); ++j) {
            if (!selected[static_cast<std::size_t>(j)] && std::abs(corr(j)) > best_mag) {
                best_mag = std::abs(corr(j));
                best = j;
            }
        }
        if (best < 0) {
            break;  // residual orthogonal to every remaining atom
        }

        Vec<Scalar> cross(static_cast<Index>(support.size()));
        for (std::size_t s = 0; s < support.size(); ++s) {
            cross(static_cast<Index>(s)) = dict.col(support[s]).dot(dict.col(best));
        }
        chol.append(cross, dict.col(best).squaredNorm());
        support.push_back(best);
        selected[static_cast<std::size_t>(best)] = 1;

        Vec<Scalar> rhs(static_cast<Index>(support.size()));
        for (std::size_t s = 0; s < support.size(); ++s) {
            rhs(static_cast<Index>(s)) = dict.col(support[s]).dot(x);
        }
        coeffs = chol.solve(rhs);
        residual = x;
        for (std::size_t s = 0; s < support.size(); ++s) {
            residual.noalias() -= coeffs(static_cast<Index>(s)) * dict.col(support[s]);
        }
        r_norm = residual.norm();
        result.stats.residual_trace.push_back(r_norm);
        result.stats.selection_order.push_back(best);
    }

    Vec<Scalar> dense = Vec<Scalar>::Zero(dict.cols());
    for (std::size_t s = 0; s < support.size(); ++s) {
        dense(support[s]) = coeffs(static_cast<Index>(s));
    }
    result.code = SparseCode<Scalar>::from_dense(dense);
    result.stats.iterations_used = support.size();
    result.stats.final_residual_norm = r_norm;
    return result;
}

template <typename Scalar>
SolveResult<Scalar> ista(const SolverContext<Scalar>& ctx, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    const Mat<Scalar>& dict = ctx.dictionary();
    check_measurement(dict, x);
    cfg.validate();

    SolveResult<Scalar> result;
    Vec<Scalar> alpha = Vec<Scalar>::Zero(dict.cols());
    Vec<Scalar> residual = x;
    const Scalar lip = ctx.lipschitz();
    if (lip == Scalar(0)) {
        result.code.dim = dict.cols();
        result.stats.final_residual_norm = x.norm();
        return result;
    }
    const Scalar step = Scalar(1) / lip;
    const Scalar shrink = cfg.lambda * step;

    Vec<Scalar> next(dict.cols());
    std::size_t it = 0;
    while (it < cfg.max_iters) {
        ++it;
        next.noalias() = alpha + step * (dict.transpose() * residual);
        for (Index j = 0; j < next.size(); ++j) {
            next(j) = soft_threshold(next(j), shrink);
        }
        residual.noalias() = x - dict * next;
        result.stats.objective_trace.push_back(Scalar(0.5) * residual.squaredNorm() +
                                               cfg.lambda * next.template lpNorm<1>());
        const Scalar delta = (next - alpha).norm();
        alpha.swap(next);
        if (delta <= cfg.tol) {
            break;
        }
    }

    result.code = SparseCode<Scalar>::from_dense(alpha, Scalar(kIstaPruneThreshold));
    result.stats.iterations_used = it;
    result.stats.final_residual_norm = (x - dict * result.code.to_dense()).norm();
    return result;
}

template <typename Scalar>
SolveResult<Scalar> qp(const SolverContext<Scalar>& ctx, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    const Mat<Scalar>& dict = ctx.dictionary();
    check_measurement(dict, x);
    cfg.validate();

    SolveResult<Scalar> result;
    const Index m = dict.cols();
    // α = u − w with u, w ≥ 0; the projection keeps both in the orthant.
    Vec<Scalar> u = Vec<Scalar>::Zero(m);
    Vec<Scalar> w = Vec<Scalar>::Zero(m);
    Vec<Scalar> residual = x;
    const Scalar lip = ctx.lipschitz();
    if (lip == Scalar(0)) {
        result.code.dim = m;
        result.stats.final_residual_norm = x.norm();
        return result;
    }
    const Scalar step = Scalar(1) / lip;

    Vec<Scalar> corr(m);
    Vec<Scalar> u_next(m);
    Vec<Scalar> w_next(m);
    std::size_t it = 0;
    while (it < cfg.max_iters) {
        ++it;
        corr.noalias() = dict.transpose() * residual;  // −∇f(α)
        u_next = (u.array() + step * (corr.array() - cfg.lambda)).cwiseMax(Scalar(0));
        w_next = (w.array() - step * (corr.array() + cfg.lambda)).cwiseMax(Scalar(0));
        const Scalar delta = std::sqrt((u_next - u).squaredNorm() + (w_next - w).squaredNorm());
        u.swap(u_next);
        w.swap(w_next);
        residual.noalias() = x - dict * (u - w);
        result.stats.objective_trace.push_back(Scalar(0.5) * residual.squaredNorm() + cfg.lambda * (u.sum() + w.sum()));
        if (delta <= cfg.tol) {
            break;
        }
    }

    result.code = SparseCode<Scalar>::from_dense(Vec<Scalar>(u - w), Scalar(kIstaPruneThreshold));
    result.stats.iterations_used = it;
    result.stats.final_residual_norm = (x - dict * result.code.to_dense()).norm();
    return result;
}

/// Looks for the shortest magnitude-ordered prefix of `alpha`'s support whose
/// least-squares fit reproduces x to `rel_tol`. Prefixes are capped at
/// rows/2 atoms, the most a representation can have and still be the unique
/// sparsest one; longer exact fits are left to SL0 itself. Returns false if
/// no admissible prefix is shorter than the full support.
template <typename Scalar>
bool refine_support(const Mat<Scalar>& dict, const Vec<Scalar>& x, Vec<Scalar>& alpha, Scalar rel_tol)
{
    std::vector<Index> order;
    for (Index j = 0; j < alpha.size(); ++j) {
        if (alpha(j) != Scalar(0)) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(alpha(a)) > std::abs(alpha(b)); });
    const std::size_t max_len = std::min<std::size_t>(order.size() - (order.empty() ? 0 : 1),
                                                      static_cast<std::size_t>(dict.rows() / 2));
    const Scalar target = rel_tol * x.norm();
    GramCholesky<Scalar> chol;
    Vec<Scalar> rhs;
    for (std::size_t len = 1; len <= max_len; ++len) {
        const Index j = order[len - 1];
        Vec<Scalar> cross(static_cast<Index>(len - 1));
        for (std::size_t s = 0; s + 1 < len; ++s) {
            cross(static_cast<Index>(s)) = dict.col(order[s]).dot(dict.col(j));
        }
        try {
            chol.append(cross, dict.col(j).squaredNorm());
        } catch (const SingularSystemError&) {
            return false;
        }
        rhs.conservativeResize(static_cast<Index>(len));
        rhs(static_cast<Index>(len - 1)) = dict.col(j).dot(x);
        const Vec<Scalar> z = chol.solve(rhs);
        Vec<Scalar> residual = x;
        for (std::size_t s = 0; s < len; ++s) {
            residual.noalias() -= z(static_cast<Index>(s)) * dict.col(order[s]);
        }
        if (residual.norm() <= target) {
            alpha.setZero();
            for (std::size_t s = 0; s < len; ++s) {
                alpha(order[s]) = z(static_cast<Index>(s));
            }
            return true;
        }
    }
    return false;
}

template <typename Scalar>
SolveResult<Scalar> sl0(const SolverContext<Scalar>& ctx, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    const Mat<Scalar>& dict = ctx.dictionary();
    check_measurement(dict, x);
    cfg.validate();
    const Mat<Scalar>& proj = ctx.projector();

    SolveResult<Scalar> result;
    // minimum-ℓ₂ feasible start
    Vec<Scalar> alpha = proj * x;
    Scalar sigma = Scalar(2) * (alpha.size() > 0 ? alpha.cwiseAbs().maxCoeff() : Scalar(0));
    const Scalar inv_two = Scalar(1) / Scalar(2);
    std::size_t steps = 0;
    while (sigma >= cfg.tol) {
        const Scalar inv_two_sigma_sq = inv_two / (sigma * sigma);
        for (std::size_t s = 0; s < cfg.sl0_inner_steps; ++s) {
            alpha.array() -= cfg.sl0_mu * alpha.array() * (-alpha.array().square() * inv_two_sigma_sq).exp();
            alpha.noalias() -= proj * (dict * alpha - x);
            ++steps;
        }
        sigma *= cfg.sl0_sigma_decay;
    }

    const Scalar peak = alpha.size() > 0 ? alpha.cwiseAbs().maxCoeff() : Scalar(0);
    for (Index j = 0; j < alpha.size(); ++j) {
        if (std::abs(alpha(j)) < Scalar(kSl0RelativePrune) * peak) alpha(j) = Scalar(0);
    }
    if (peak > Scalar(0)) {
        refine_support(dict, x, alpha, Scalar(1e-9));
    }

    result.code = SparseCode<Scalar>::from_dense(alpha);
    result.stats.iterations_used = steps;
    result.stats.final_residual_norm = (x - dict * alpha).norm();
    return result;
}

}  // namespace detail

template <typename Scalar>
SolveResult<Scalar> solve(const SolverContext<Scalar>& ctx, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    switch (ctx.kind()) {
    case SolverKind::omp: return detail::omp(ctx, x, cfg);
    case SolverKind::ista: return detail::ista(ctx, x, cfg);
    case SolverKind::sl0: return detail::sl0(ctx, x, cfg);
    case SolverKind::qp: return detail::qp(ctx, x, cfg);
    }
    throw InvalidArgument("unreachable solver kind");
}

template <typename Scalar>
SolveResult<Scalar> solve_omp(const Mat<Scalar>& dict, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    return detail::omp(SolverContext<Scalar>(dict, SolverKind::omp), x, cfg);
}

template <typename Scalar>
SolveResult<Scalar> solve_ista(const Mat<Scalar>& dict, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    return detail::ista(SolverContext<Scalar>(dict, SolverKind::ista), x, cfg);
}

template <typename Scalar>
SolveResult<Scalar> solve_sl0(const Mat<Scalar>& dict, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    return detail::sl0(SolverContext<Scalar>(dict, SolverKind::sl0), x, cfg);
}

template <typename Scalar>
SolveResult<Scalar> solve_qp(const Mat<Scalar>& dict, const Vec<Scalar>& x, const SolverConfig<Scalar>& cfg)
{
    return detail::qp(SolverContext<Scalar>(dict, SolverKind::qp), x, cfg);
}

/// Re-fits the code's values by least squares on its support, removing the
/// ℓ₁ shrinkage bias. Supports larger than D.rows() keep the D.rows()
/// largest-magnitude entries. A singular support leaves the code unchanged.
template <typename Scalar>
SparseCode<Scalar> debias(const Mat<Scalar>& dict, const Vec<Scalar>& x, const SparseCode<Scalar>& code)
{
    if (code.nnz() == 0) {
        return code;
    }
    std::vector<std::size_t> order(code.nnz());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(code.values[a]) > std::abs(code.values[b]);
    });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(dict.rows())));
    std::vector<Index> support;
    for (std::size_t o : order) support.push_back(code.indices[o]);
    std::sort(support.begin(), support.end());

    Mat<Scalar> sub(dict.rows(), static_cast<Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) sub.col(static_cast<Index>(s)) = dict.col(support[s]);
    Vec<Scalar> z;
    try {
        z = least_squares(sub, x);
    } catch (const SingularSystemError&) {
        return code;
    }
    Vec<Scalar> dense = Vec<Scalar>::Zero(code.dim);
    for (std::size_t s = 0; s < support.size(); ++s) dense(support[s]) = z(static_cast<Index>(s));
    return SparseCode<Scalar>::from_dense(dense);
}

/// Dispatch by name ("omp", "ista", "sl0", "qp"; case-insensitive).
template <typename Scalar>
SolveResult<Scalar> solve(std::string_view name, const Mat<Scalar>& dict, const Vec<Scalar>& x,
                          const SolverConfig<Scalar>& cfg)
{
    const SolverKind kind = parse_solver_kind(name);
    return solve(SolverContext<Scalar>(dict, kind), x, cfg);
}

}  // namespace sparse_sr
