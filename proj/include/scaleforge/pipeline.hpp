#pragma once

// Composite workflows used by the CLI: object-level shift between two bundles and
// the numerical check that a scale-only shift produces both divergences.

#include <cstddef>
#include <cstdint>
#include <utility>

#include "scaleforge/shift.hpp"
#include "scaleforge/simrfs.hpp"

namespace scaleforge {

inline constexpr const char* kVerticalQuartileProxy = "object vertical position, pooled quartile classes";

/// One sample per non-synthetic box, labeled by the pooled quantile class of its
/// normalized vertical center.
std::pair<LabeledScaleSamples, LabeledScaleSamples> vertical_labeled_samples(const DatasetBundle& a,
                                                                             const DatasetBundle& b,
                                                                             int classes = 4);

ShiftReport bundle_shift(const DatasetBundle& a, const DatasetBundle& b, Eigen::Index bins = 256);

struct TheoremConfig {
    std::size_t objects = 10000;
    double mu = 4.605170185988091;  // ln 100
    double mu_shift = 0.9162907318741551;  // ln 2.5
    double sigma = 0.3;
    double vertical_gain = 2.0;
    double lambda = 100;
    Eigen::Index bins = 32;
    int resamples = 200;
    int label_classes = 4;
    double null_bound = 0.05;
    double se_multiple = 5.0;
    std::uint64_t seed = 7;
};

void validate(const TheoremConfig& cfg);

SceneConfig theorem_scene(const TheoremConfig& cfg, double mu);

/// Keeps boxes in image order until exactly `objects` remain; images past the cut are removed.
void truncate_objects(SyntheticBundle& bundle, std::size_t objects);

/// A scale-only pair (shifted) or two draws of one config (null), each side holding exactly cfg.objects boxes.
std::pair<SyntheticBundle, SyntheticBundle> theorem_pair(const TheoremConfig& cfg, bool null_pair);

struct TheoremSide {
    ShiftReport report;
    BootstrapErrors se;
};

struct TheoremCheck {
    TheoremSide shifted;
    TheoremSide null;
    bool shifted_ok = false;
    bool null_ok = false;

    bool passed() const noexcept { return shifted_ok && null_ok; }
};

TheoremCheck verify_theorem(const TheoremConfig& cfg);

}  // namespace scaleforge
