#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scaleforge/partition.hpp"
#include "scaleforge/stats.hpp"

namespace scaleforge {

/// Total variation 1/2 sum |p1 - p2| over a shared grid.
double diversity_shift(const EmpiricalDistribution& p1, const EmpiricalDistribution& p2);

/// Total variation restricted to bins where exactly one side has mass (p1 * p2 = 0).
double diversity_shift_on_disjoint_support(const EmpiricalDistribution& p1, const EmpiricalDistribution& p2);

/// (scale, label) pairs; labels index a finite alphabet [0, label_count).
struct LabeledScaleSamples {
    std::vector<double> scales;
    std::vector<int> labels;
    int label_count = 0;
};

struct CorrelationShiftEstimate {
    double value = 0;
    /// Bins where one side has samples and the other has none (conditional undefined).
    std::size_t undefined_bins = 0;
};

/// 1/2 sum_bins sqrt(p1 p2) sum_y |p1(y|c) - p2(y|c)| on the given edges.
CorrelationShiftEstimate correlation_shift(const LabeledScaleSamples& s1, const LabeledScaleSamples& s2,
                                           const Eigen::VectorXd& edges);

struct ShiftReport {
    double div_div = 0;
    double div_div_disjoint = 0;
    double div_cor = 0;
    double kl = 0;
    Eigen::Index bins = 0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t undefined_bins = 0;
    std::string label_proxy;
};

ShiftReport shift_report(const LabeledScaleSamples& s1, const LabeledScaleSamples& s2, Eigen::Index bins = 256,
                         double kl_smoothing = kDefaultKlSmoothing);

struct BootstrapErrors {
    double div_div = 0;
    double div_cor = 0;
};

/// Standard deviation of both divergences over `resamples` paired bootstrap draws,
/// keeping the edges of the original pooled samples.
BootstrapErrors bootstrap_errors(const LabeledScaleSamples& s1, const LabeledScaleSamples& s2, Eigen::Index bins,
                                 int resamples, std::uint64_t seed);

/// Class index in [0, classes) from pooled sample quantiles of `pooled`.
std::vector<double> quantile_thresholds(std::span<const double> pooled, int classes);
int quantile_class(const std::vector<double>& thresholds, double value) noexcept;

enum class ScaleSource {
    PatchMean,  ///< one sample per patch: its mean scale
    Objects,    ///< one sample per object in the domain's patches
};

/// Per-domain labeled samples. Labels are quartile classes of the per-patch object
/// count pooled over all domains.
std::vector<LabeledScaleSamples> domain_samples(const BenchmarkManifest& manifest, std::span<const Patch> patches,
                                                ScaleSource source = ScaleSource::PatchMean);

inline constexpr const char* kCountQuartileProxy = "patch object count, pooled quartile classes";

/// Row-major M x M matrix of reports, entry (a, b) compares domain a against domain b.
std::vector<ShiftReport> shift_matrix(const BenchmarkManifest& manifest, std::span<const Patch> patches,
                                      Eigen::Index bins = 256, ScaleSource source = ScaleSource::PatchMean);

}  // namespace scaleforge
