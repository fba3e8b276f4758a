#pragma once

// Gaussian mixtures over object scale (1D) and (scale, vertical position) (2D),
// fitted by expectation-maximization. Header-only, templated on the scalar type.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "scaleforge/error.hpp"
#include "scaleforge/rng.hpp"

namespace scaleforge {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// n x 2 point matrix, one (scale, vertical) row per object.
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

template <typename Scalar>
struct GaussianMixture1D {
    VectorX<Scalar> weights;
    VectorX<Scalar> means;
    VectorX<Scalar> stds;

    Eigen::Index components() const noexcept { return weights.size(); }
};

template <typename Scalar>
struct GaussianMixture2D {
    using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
    using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

    VectorX<Scalar> weights;
    /// Column k is the mean of component k; row 0 is scale, row 1 is vertical position.
    Eigen::Matrix<Scalar, 2, Eigen::Dynamic> means;
    std::vector<Matrix2> covariances;

    Eigen::Index components() const noexcept { return weights.size(); }
};

using GmmModel1D = GaussianMixture1D<double>;
using GmmModel2D = GaussianMixture2D<double>;

enum class EmInit { KMeans, RandomResponsibility };

struct EmConfig {
    int components = 5;
    int max_iters = 200;
    /// Relative change of the mean log-likelihood that ends the iteration.
    double tol = 1e-6;
    double var_floor = 1e-6;
    std::uint64_t seed = 0;
    EmInit init = EmInit::KMeans;
    int restarts = 3;
    /// Components whose weight falls below this are removed.
    double prune_weight = 1e-6;
};

inline void validate(const EmConfig& cfg) {
    if (cfg.components < 1) throw ContractError("EmConfig: components must be >= 1");
    if (cfg.max_iters < 1) throw ContractError("EmConfig: max_iters must be >= 1");
    if (!(cfg.tol > 0)) throw ContractError("EmConfig: tol must be > 0");
    if (!(cfg.var_floor > 0)) throw ContractError("EmConfig: var_floor must be > 0");
    if (cfg.restarts < 1) throw ContractError("EmConfig: restarts must be >= 1");
}

template <typename Model>
struct EmFit {
    Model model;
    /// Mean log-likelihood after initialization and after every EM iteration.
    std::vector<double> trace;
    /// Component count in effect for each trace entry.
    std::vector<Eigen::Index> trace_components;
    int iterations = 0;
    bool converged = false;
    Eigen::Index pruned = 0;
};

namespace detail {

template <typename Scalar>
inline constexpr Scalar kLogTwoPi = Scalar(1.8378770664093454835606594728112353);

/// Row-wise log-sum-exp normalization of per-component log joint densities.
/// Returns the mean log-likelihood and overwrites `log_joint` with responsibilities.
template <typename Scalar>
double normalize_responsibilities(MatrixX<Scalar>& log_joint) {
    double total = 0;
    for (Eigen::Index i = 0; i < log_joint.rows(); ++i) {
        const Scalar peak = log_joint.row(i).maxCoeff();
        auto row = log_joint.row(i).array();
        row = (row - peak).exp();
        const Scalar sum = row.sum();
        row /= sum;
        total += static_cast<double>(peak + std::log(sum));
    }
    return total / static_cast<double>(log_joint.rows());
}

template <typename Scalar>
MatrixX<Scalar> log_joint(const GaussianMixture1D<Scalar>& m, const VectorX<Scalar>& x) {
    MatrixX<Scalar> out(x.size(), m.components());
    for (Eigen::Index k = 0; k < m.components(); ++k) {
        const Scalar s = m.stds[k];
        out.col(k) = (-Scalar(0.5) * ((x.array() - m.means[k]) / s).square() -
                      Scalar(0.5) * kLogTwoPi<Scalar> - std::log(s) + std::log(m.weights[k]))
                         .matrix();
    }
    return out;
}

template <typename Scalar>
MatrixX<Scalar> log_joint(const GaussianMixture2D<Scalar>& m, const Points2<Scalar>& pts) {
    MatrixX<Scalar> out(pts.rows(), m.components());
    for (Eigen::Index k = 0; k < m.components(); ++k) {
        const Eigen::LLT<typename GaussianMixture2D<Scalar>::Matrix2> llt(m.covariances[k]);
        const auto& L = llt.matrixL();
        const Scalar log_det = Scalar(2) * (std::log(llt.matrixLLT()(0, 0)) + std::log(llt.matrixLLT()(1, 1)));
        Eigen::Matrix<Scalar, 2, Eigen::Dynamic> d = (pts.transpose().colwise() - m.means.col(k));
        L.solveInPlace(d);
        out.col(k) = (-Scalar(0.5) * d.colwise().squaredNorm().array() - kLogTwoPi<Scalar> -
                      Scalar(0.5) * log_det + std::log(m.weights[k]))
                         .matrix()
                         .transpose();
    }
    return out;
}

template <typename Scalar>
GaussianMixture1D<Scalar> m_step(const VectorX<Scalar>& x, const MatrixX<Scalar>& resp, Scalar var_floor) {
    const VectorX<Scalar> nk = resp.colwise().sum().transpose();
    GaussianMixture1D<Scalar> m;
    m.weights = nk / static_cast<Scalar>(x.size());
    m.means = VectorX<Scalar>::Zero(nk.size());
    m.stds = VectorX<Scalar>::Constant(nk.size(), std::sqrt(var_floor));
    for (Eigen::Index k = 0; k < nk.size(); ++k) {
        if (!(nk[k] > 0)) continue;
        m.means[k] = resp.col(k).dot(x) / nk[k];
        const Scalar var = (resp.col(k).array() * (x.array() - m.means[k]).square()).sum() / nk[k];
        m.stds[k] = std::sqrt(std::max(var, var_floor));
    }
    return m;
}

/// Eigenvalue clipping is the exact constrained maximizer of the Gaussian likelihood
/// under Sigma >= floor * I, so EM stays monotone with the floor in place.
template <typename Scalar>
typename GaussianMixture2D<Scalar>::Matrix2 floor_covariance(const typename GaussianMixture2D<Scalar>::Matrix2& s,
                                                             Scalar var_floor) {
    using Matrix2 = typename GaussianMixture2D<Scalar>::Matrix2;
    const Matrix2 sym = Scalar(0.5) * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix2> eig(sym);
    const auto clipped = eig.eigenvalues().cwiseMax(var_floor);
    Matrix2 out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    return Scalar(0.5) * (out + out.transpose());
}

template <typename Scalar>
GaussianMixture2D<Scalar> m_step(const Points2<Scalar>& pts, const MatrixX<Scalar>& resp, Scalar var_floor) {
    using Matrix2 = typename GaussianMixture2D<Scalar>::Matrix2;
    const VectorX<Scalar> nk = resp.colwise().sum().transpose();
    GaussianMixture2D<Scalar> m;
    m.weights = nk / static_cast<Scalar>(pts.rows());
    m.means = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>::Zero(2, nk.size());
    m.covariances.assign(static_cast<std::size_t>(nk.size()), Matrix2::Identity() * var_floor);
    for (Eigen::Index k = 0; k < nk.size(); ++k) {
        if (!(nk[k] > 0)) continue;
        m.means.col(k) = (pts.transpose() * resp.col(k)) / nk[k];
        const Points2<Scalar> d = pts.rowwise() - m.means.col(k).transpose();
        const Matrix2 s = (d.transpose() * resp.col(k).asDiagonal() * d) / nk[k];
        m.covariances[static_cast<std::size_t>(k)] = floor_covariance<Scalar>(s, var_floor);
    }
    return m;
}

template <typename Scalar>
Eigen::Index sample_count(const VectorX<Scalar>& x) { return x.size(); }
template <typename Scalar>
Eigen::Index sample_count(const Points2<Scalar>& p) { return p.rows(); }

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> as_rows(const VectorX<Scalar>& x) { return x; }
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> as_rows(const Points2<Scalar>& p) { return p; }

/// k-means++ seeding followed by Lloyd iterations; returns hard responsibilities.
template <typename Scalar>
MatrixX<Scalar> kmeans_responsibilities(const MatrixX<Scalar>& data, Eigen::Index k, std::mt19937_64& rng) {
    const Eigen::Index n = data.rows();
    MatrixX<Scalar> centers(k, data.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = data.row(pick(rng));
    VectorX<Scalar> d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = (data.row(i) - centers.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < k; ++c) {
        const Scalar total = d2.sum();
        Eigen::Index chosen = pick(rng);
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, static_cast<double>(total));
            Scalar target = static_cast<Scalar>(u(rng));
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target <= 0 && d2[i] > 0) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = data.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (data.row(i) - centers.row(c)).squaredNorm());
        }
    }

    std::vector<Eigen::Index> label(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            (centers.rowwise() - data.row(i)).rowwise().squaredNorm().minCoeff(&best);
            if (label[static_cast<std::size_t>(i)] != best) {
                label[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        MatrixX<Scalar> sums = MatrixX<Scalar>::Zero(k, data.cols());
        VectorX<Scalar> counts = VectorX<Scalar>::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(label[static_cast<std::size_t>(i)]) += data.row(i);
            counts[label[static_cast<std::size_t>(i)]] += 1;
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
        }
    }
    MatrixX<Scalar> resp = MatrixX<Scalar>::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) resp(i, label[static_cast<std::size_t>(i)]) = 1;
    return resp;
}

template <typename Scalar>
MatrixX<Scalar> random_responsibilities(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(1e-3, 1.0);
    MatrixX<Scalar> resp(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < k; ++c) resp(i, c) = static_cast<Scalar>(u(rng));
        resp.row(i) /= resp.row(i).sum();
    }
    return resp;
}

template <typename Scalar>
void drop_components(GaussianMixture1D<Scalar>& m, const std::vector<Eigen::Index>& keep) {
    GaussianMixture1D<Scalar> out;
    const auto k = static_cast<Eigen::Index>(keep.size());
    out.weights.resize(k);
    out.means.resize(k);
    out.stds.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        out.weights[i] = m.weights[keep[static_cast<std::size_t>(i)]];
        out.means[i] = m.means[keep[static_cast<std::size_t>(i)]];
        out.stds[i] = m.stds[keep[static_cast<std::size_t>(i)]];
    }
    out.weights /= out.weights.sum();
    m = std::move(out);
}

template <typename Scalar>
void drop_components(GaussianMixture2D<Scalar>& m, const std::vector<Eigen::Index>& keep) {
    GaussianMixture2D<Scalar> out;
    const auto k = static_cast<Eigen::Index>(keep.size());
    out.weights.resize(k);
    out.means.resize(2, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index src = keep[static_cast<std::size_t>(i)];
        out.weights[i] = m.weights[src];
        out.means.col(i) = m.means.col(src);
        out.covariances.push_back(m.covariances[static_cast<std::size_t>(src)]);
    }
    out.weights /= out.weights.sum();
    m = std::move(out);
}

/// Removes components below the weight threshold. Returns how many were removed.
template <typename Model>
Eigen::Index prune(Model& m, double prune_weight) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < m.components(); ++k) {
        if (static_cast<double>(m.weights[k]) >= prune_weight) keep.push_back(k);
    }
    if (keep.empty()) {
        Eigen::Index best = 0;
        m.weights.maxCoeff(&best);
        keep.push_back(best);
    }
    const Eigen::Index removed = m.components() - static_cast<Eigen::Index>(keep.size());
    if (removed > 0) drop_components(m, keep);
    return removed;
}

template <typename Scalar>
std::vector<Eigen::Index> canonical_order(const GaussianMixture1D<Scalar>& m) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m.components()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (m.means[a] != m.means[b]) return m.means[a] < m.means[b];
        return m.stds[a] < m.stds[b];
    });
    return order;
}

template <typename Scalar>
std::vector<Eigen::Index> canonical_order(const GaussianMixture2D<Scalar>& m) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m.components()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (m.means(1, a) != m.means(1, b)) return m.means(1, a) < m.means(1, b);
        return m.means(0, a) < m.means(0, b);
    });
    return order;
}

template <typename Model, typename Data>
EmFit<Model> run_em(const Data& data, const EmConfig& cfg, std::uint64_t seed) {
    using Scalar = typename Data::Scalar;
    std::mt19937_64 rng(seed);
    const Eigen::Index k = cfg.components;
    MatrixX<Scalar> resp = cfg.init == EmInit::KMeans
                               ? kmeans_responsibilities<Scalar>(as_rows<Scalar>(data), k, rng)
                               : random_responsibilities<Scalar>(sample_count<Scalar>(data), k, rng);
    const auto floor = static_cast<Scalar>(cfg.var_floor);

    EmFit<Model> fit;
    fit.model = m_step<Scalar>(data, resp, floor);
    fit.pruned += prune(fit.model, cfg.prune_weight);
    resp = log_joint(fit.model, data);
    double ll = normalize_responsibilities(resp);
    fit.trace.push_back(ll);
    fit.trace_components.push_back(fit.model.components());

    for (int it = 1; it <= cfg.max_iters; ++it) {
        Model next = m_step<Scalar>(data, resp, floor);
        fit.pruned += prune(next, cfg.prune_weight);
        MatrixX<Scalar> next_resp = log_joint(next, data);
        const double next_ll = normalize_responsibilities(next_resp);
        fit.model = std::move(next);
        resp = std::move(next_resp);
        fit.trace.push_back(next_ll);
        fit.trace_components.push_back(fit.model.components());
        fit.iterations = it;
        const double scale = std::max(std::abs(ll), std::numeric_limits<double>::min());
        const bool done = std::abs(next_ll - ll) <= cfg.tol * scale;
        ll = next_ll;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

template <typename Model, typename Data>
EmFit<Model> fit_with_restarts(const Data& data, const EmConfig& cfg) {
    validate(cfg);
    if (sample_count<typename Data::Scalar>(data) < cfg.components) {
        throw ContractError("EM fit needs at least as many samples as components");
    }
    EmFit<Model> best;
    for (int r = 0; r < cfg.restarts; ++r) {
        EmFit<Model> fit = run_em<Model>(data, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        if (r == 0 || fit.trace.back() > best.trace.back()) best = std::move(fit);
    }
    if (best.pruned > 0) {
        spdlog::warn("EM: pruned {} collapsed component(s); {} remain", best.pruned,
                     best.model.components());
    }
    drop_components(best.model, canonical_order(best.model));
    return best;
}

}  // namespace detail

template <typename Scalar>
EmFit<GaussianMixture1D<Scalar>> fit_gmm_1d(const VectorX<Scalar>& samples, const EmConfig& cfg = {}) {
    if (!samples.allFinite()) throw ContractError("fit_gmm_1d: samples must be finite");
    return detail::fit_with_restarts<GaussianMixture1D<Scalar>>(samples, cfg);
}

/// Points must be normalized into [0,1] on both axes.
template <typename Scalar>
EmFit<GaussianMixture2D<Scalar>> fit_gmm_2d(const Points2<Scalar>& points, const EmConfig& cfg = {}) {
    if (!points.allFinite() || (points.array() < Scalar(0)).any() || (points.array() > Scalar(1)).any()) {
        throw ContractError("fit_gmm_2d: points must be finite and normalized into [0,1]");
    }
    return detail::fit_with_restarts<GaussianMixture2D<Scalar>>(points, cfg);
}

/// n x K posterior component probabilities.
template <typename Model, typename Data>
MatrixX<typename Data::Scalar> responsibilities(const Model& model, const Data& data) {
    MatrixX<typename Data::Scalar> r = detail::log_joint(model, data);
    detail::normalize_responsibilities(r);
    return r;
}

/// Mean per-sample log density.
template <typename Model, typename Data>
double log_likelihood(const Model& model, const Data& data) {
    MatrixX<typename Data::Scalar> r = detail::log_joint(model, data);
    return detail::normalize_responsibilities(r);
}

}  // namespace scaleforge
