#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scaleforge/annot.hpp"

namespace scaleforge {

struct MatchedPair {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double distance = 0;
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    double total_distance() const noexcept;
};

/// Maximum-cardinality, minimum-total-distance one-to-one matching. A prediction may
/// match a ground-truth box only when its distance to the box center is at most the
/// box diagonal.
MatchResult match_predictions(std::span<const PredictedPoint> preds, std::span<const BoxAnnotation> gts);

/// Exact rectangular assignment (Hungarian with potentials). cost is rows x cols with
/// rows <= cols; returns the column assigned to each row.
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost);

struct CountPair {
    std::size_t n_pred = 0;
    std::size_t n_gt = 0;
};

struct LocMetrics {
    double f1 = 0;
    double precision = 0;
    double recall = 0;
    double mae = 0;
    /// Root of the mean squared count error.
    double mse = 0;
    /// Absent when no image has ground truth.
    std::optional<double> nae;
    double macro_f1 = 0;
    double macro_precision = 0;
    double macro_recall = 0;
    std::size_t images = 0;
};

/// Precision with empty denominators: 1 when nothing was missed either, else 0.
double safe_precision(std::size_t tp, std::size_t fp, std::size_t fn) noexcept;
double safe_recall(std::size_t tp, std::size_t fp, std::size_t fn) noexcept;
double f1_score(double precision, double recall) noexcept;

LocMetrics localization_metrics(std::span<const MatchResult> results, std::span<const CountPair> counts);

/// Mean of the map over the pixels each box touches. map is height x width.
std::vector<double> confidence_from_map(const Eigen::MatrixXd& map, std::span<const BoxAnnotation> boxes);

struct ConfidenceRecord {
    double confidence = 0;
    bool matched = false;
};

struct CalibrationBin {
    std::size_t count = 0;
    double mean_confidence = 0;
    double precision = 0;
};

struct CalibrationReport {
    std::array<CalibrationBin, 10> bins{};
    double ece = 0;
    std::size_t n = 0;
};

/// Expected calibration error over 10 equal-width bins on [0,1] (last bin closed).
CalibrationReport ece(std::span<const ConfidenceRecord> records);

}  // namespace scaleforge
