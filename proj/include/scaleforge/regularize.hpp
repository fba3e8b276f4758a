#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scaleforge/annot.hpp"
#include "scaleforge/mixture.hpp"

namespace scaleforge {

/// Horizontal strip [y_top, y_bottom) of one image and the objects whose centers fall in it.
struct Patch {
    std::string image_id;
    int index = 0;
    double y_top = 0;
    double y_bottom = 0;
    std::vector<BoxAnnotation> objects;
    double mean_scale = 0;
    double std_scale = 0;
    /// Canonical index of the mixture component that produced the patch.
    Eigen::Index source_component = 0;

    std::string id() const { return image_id + "#" + std::to_string(index); }
    double height() const noexcept { return y_bottom - y_top; }
};

/// Recomputes mean_scale/std_scale (population moments of scale_of over objects).
void update_scale_moments(Patch& patch);

enum class VarianceRule {
    StdOverMean,       ///< reject when std > ratio * mean
    VarianceOverMean,  ///< reject when variance > ratio * mean
};

struct FilterConfig {
    double min_height = 100.0;
    double sigma_ratio = 3.0;
    VarianceRule rule = VarianceRule::StdOverMean;
    std::size_t min_objects = 10;
    double weight_floor = 0.05;
    /// Per-object height floor in pixels; 0 disables it.
    double min_object_height = 0.0;
    /// Vertically adjacent components closer than this many pooled vertical stds are merged.
    double merge_separation = 3.0;

    /// Variance-vs-mean rule with ratio 2.
    static FilterConfig appendix_preset();
};

void validate(const FilterConfig& cfg);

/// (scale / max scale in image, center_y / height) per non-synthetic box, in box order.
Points2<double> normalize_features(const ImageRecord& image);

struct SegmentResult {
    std::vector<Patch> patches;
    std::size_t merged_components = 0;
    std::size_t pruned_components = 0;
    /// Objects in no patch (their center falls between patch spans).
    std::size_t dropped_objects = 0;
    std::string diagnostic;
};

SegmentResult segment_image(const ImageRecord& image, const GmmModel2D& model, const FilterConfig& cfg);

struct Rejection {
    Patch patch;
    std::vector<std::string> reasons;
};

struct FilterResult {
    std::vector<Patch> kept;
    std::vector<Rejection> rejected;
};

FilterResult filter_patches(std::vector<Patch> patches, const FilterConfig& cfg);

struct RegularizeConfig {
    EmConfig em;
    FilterConfig filter;
    bool apply_filter = true;
    unsigned threads = 1;
};

struct ImageOutcome {
    std::string image_id;
    /// Empty when the image was segmented.
    std::string skipped_reason;
    GmmModel2D model;
    std::size_t patches = 0;
    std::size_t dropped_objects = 0;
};

struct RegularizeResult {
    std::vector<Patch> kept;
    std::vector<Rejection> rejected;
    std::vector<ImageOutcome> images;
};

/// Fit, segment and filter every image. Image i is fitted with seed derive_seed(em.seed, i),
/// so results do not depend on the thread count.
RegularizeResult regularize_bundle(const DatasetBundle& bundle, const RegularizeConfig& cfg);

}  // namespace scaleforge
