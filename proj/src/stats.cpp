#include "scaleforge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scaleforge/error.hpp"

namespace scaleforge {
namespace {

void require_edges(const Eigen::VectorXd& edges) {
    if (edges.size() < 2) throw ContractError("histogram needs at least two edges");
    for (Eigen::Index i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw ContractError("histogram edges must be strictly increasing");
    }
}

void require_same_grid(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
    if (p.edges.size() != q.edges.size() || p.edges != q.edges) {
        throw ContractError("distributions must share identical edges");
    }
}

}  // namespace

Eigen::VectorXd linear_edges(double lo, double hi, Eigen::Index bins) {
    if (bins < 1) throw ContractError("bin count must be >= 1");
    if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) throw ContractError("invalid edge range");
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Eigen::VectorXd edges = Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
    edges[bins] = hi;
    return edges;
}

Eigen::VectorXd shared_edges(std::span<const double> a, std::span<const double> b, Eigen::Index bins) {
    if (a.empty() && b.empty()) throw ContractError("shared_edges needs at least one sample");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto s : {a, b}) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    return linear_edges(lo, hi, bins);
}

Eigen::Index bin_index(const Eigen::VectorXd& edges, double value) noexcept {
    const Eigen::Index bins = edges.size() - 1;
    if (value < edges[0]) return 0;
    if (value >= edges[bins]) return bins - 1;
    const double* begin = edges.data();
    const double* it = std::upper_bound(begin, begin + edges.size(), value);
    return std::clamp<Eigen::Index>((it - begin) - 1, 0, bins - 1);
}

EmpiricalDistribution histogram(std::span<const double> samples, const Eigen::VectorXd& edges) {
    require_edges(edges);
    EmpiricalDistribution dist;
    dist.edges = edges;
    dist.mass = Eigen::VectorXd::Zero(edges.size() - 1);
    dist.n_samples = samples.size();
    const double lo = edges[0];
    const double hi = edges[edges.size() - 1];
    for (double v : samples) {
        if (!std::isfinite(v)) throw ContractError("histogram samples must be finite");
        if (v < lo) ++dist.clipped_low;
        if (v > hi) ++dist.clipped_high;
        dist.mass[bin_index(edges, v)] += 1.0;
    }
    if (dist.n_samples > 0) dist.mass /= static_cast<double>(dist.n_samples);
    return dist;
}

double kl_divergence(const EmpiricalDistribution& p, const EmpiricalDistribution& q, double smoothing) {
    require_same_grid(p, q);
    if (!(smoothing > 0)) throw ContractError("KL smoothing must be positive");
    const Eigen::ArrayXd ps = (p.mass.array() + smoothing) / (p.mass.sum() + smoothing * p.bins());
    const Eigen::ArrayXd qs = (q.mass.array() + smoothing) / (q.mass.sum() + smoothing * q.bins());
    const double kl = (ps * (ps / qs).log()).sum();
    // Gibbs: any negative value is rounding.
    return std::max(0.0, kl);
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ContractError("pearson: length mismatch");
    if (xs.size() < 2) throw ContractError("pearson: need at least two pairs");
    auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    if (*xmin == *xmax || *ymin == *ymax) return std::nullopt;

    const Eigen::Map<const Eigen::ArrayXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
    const Eigen::Map<const Eigen::ArrayXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
    const Eigen::ArrayXd dx = x - x.mean();
    const Eigen::ArrayXd dy = y - y.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (sxx == 0 || syy == 0) return std::nullopt;
    return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ContractError("spearman: length mismatch");
    if (xs.size() < 2) throw ContractError("spearman: need at least two pairs");
    const auto rx = fractional_ranks(xs);
    const auto ry = fractional_ranks(ys);
    return pearson(rx, ry);
}

CorrelationSummary summarize_correlations(std::vector<std::optional<double>> coefficients) {
    CorrelationSummary out;
    std::vector<double> defined;
    for (const auto& c : coefficients) {
        if (c) defined.push_back(*c);
        else ++out.undefined;
    }
    if (!defined.empty()) {
        out.mean = std::accumulate(defined.begin(), defined.end(), 0.0) /
                   static_cast<double>(defined.size());
    }
    out.histogram = histogram(defined, linear_edges(-1.0, 1.0, 20));
    out.coefficients = std::move(coefficients);
    return out;
}

ScalePositionCorrelations scale_position_correlations(const DatasetBundle& bundle,
                                                      bool include_synthetic) {
    ScalePositionCorrelations out;
    std::vector<std::optional<double>> vertical, horizontal, vh;
    std::vector<double> scale, cx, cy;
    for (const auto& image : bundle.images) {
        scale.clear();
        cx.clear();
        cy.clear();
        for (const auto& b : image.boxes) {
            if (b.synthetic && !include_synthetic) continue;
            scale.push_back(scale_of(b));
            cx.push_back(b.center_x());
            cy.push_back(b.center_y());
        }
        if (scale.size() < 2) {
            ++out.skipped_images;
            continue;
        }
        out.image_ids.push_back(image.id);
        vertical.push_back(pearson(scale, cy));
        horizontal.push_back(pearson(scale, cx));
        vh.push_back(pearson(cy, cx));
    }
    out.vertical = summarize_correlations(std::move(vertical));
    out.horizontal = summarize_correlations(std::move(horizontal));
    out.vh = summarize_correlations(std::move(vh));
    return out;
}

std::optional<double> count_scale_spearman(const DatasetBundle& bundle) {
    std::vector<double> counts, means;
    for (const auto& image : bundle.images) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& b : image.boxes) {
            if (b.synthetic) continue;
            sum += scale_of(b);
            ++n;
        }
        if (n == 0) continue;
        counts.push_back(static_cast<double>(n));
        means.push_back(sum / static_cast<double>(n));
    }
    if (counts.size() < 2) return std::nullopt;
    return spearman(counts, means);
}

}  // namespace scaleforge
