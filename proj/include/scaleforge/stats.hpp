#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scaleforge/annot.hpp"

namespace scaleforge {

/// Normalized histogram over strictly increasing edges. Bins are right-open except the last.
struct EmpiricalDistribution {
    Eigen::VectorXd edges;
    Eigen::VectorXd mass;
    std::size_t n_samples = 0;
    /// Samples outside [edges.front(), edges.back()] folded into the terminal bins.
    std::size_t clipped_low = 0;
    std::size_t clipped_high = 0;

    Eigen::Index bins() const noexcept { return mass.size(); }
    bool empty() const noexcept { return n_samples == 0; }
};

/// `bins` equal-width edges spanning [lo, hi]. A degenerate range is widened by one unit.
Eigen::VectorXd linear_edges(double lo, double hi, Eigen::Index bins);

/// Equal-width edges over the pooled min/max of both sample sets.
Eigen::VectorXd shared_edges(std::span<const double> a, std::span<const double> b,
                             Eigen::Index bins = 256);

/// Bin index for value under the right-open rule, with out-of-range values clipped.
Eigen::Index bin_index(const Eigen::VectorXd& edges, double value) noexcept;

EmpiricalDistribution histogram(std::span<const double> samples, const Eigen::VectorXd& edges);

inline constexpr double kDefaultKlSmoothing = 1e-9;

/// KL(p || q) after adding `smoothing` to every bin and renormalizing both sides.
double kl_divergence(const EmpiricalDistribution& p, const EmpiricalDistribution& q,
                     double smoothing = kDefaultKlSmoothing);

/// Sample Pearson coefficient; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

/// Pearson on fractional (mean-of-ties) ranks.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks, ties receive the mean of the ranks they span.
std::vector<double> fractional_ranks(std::span<const double> values);

struct CorrelationSummary {
    /// One entry per analysed image; nullopt marks an undefined coefficient.
    std::vector<std::optional<double>> coefficients;
    std::optional<double> mean;
    std::size_t undefined = 0;
    /// Histogram of the defined coefficients over [-1, 1] (20 bins).
    EmpiricalDistribution histogram;
};

CorrelationSummary summarize_correlations(std::vector<std::optional<double>> coefficients);

struct ScalePositionCorrelations {
    CorrelationSummary vertical;    // (scale, center y)
    CorrelationSummary horizontal;  // (scale, center x)
    CorrelationSummary vh;          // (center y, center x)
    std::vector<std::string> image_ids;
    std::size_t skipped_images = 0;
};

/// Per-image Pearson correlations between scale and box-center position. Images with
/// fewer than two usable boxes are skipped. Synthetic pseudo-boxes are ignored unless
/// include_synthetic is set.
ScalePositionCorrelations scale_position_correlations(const DatasetBundle& bundle,
                                                      bool include_synthetic = false);

/// Spearman between per-image object count and per-image mean scale.
std::optional<double> count_scale_spearman(const DatasetBundle& bundle);

}  // namespace scaleforge
