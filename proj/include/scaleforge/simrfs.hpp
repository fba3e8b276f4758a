#pragma once

// Random-finite-set crowd scene generator: Poisson cardinality, i.i.d. object
// attributes, and a configurable scale law p(c | position).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scaleforge/annot.hpp"

namespace scaleforge {

struct ConstantScale {
    double c0 = 400;
    bool operator==(const ConstantScale&) const = default;
};

/// c = a * (y / H) + b.
struct LinearInY {
    double a = 0;
    double b = 400;
    bool operator==(const LinearInY&) const = default;
};

/// ln c ~ N(mu + vertical_gain * (y / H - 1/2), sigma^2).
struct LogNormalScale {
    double mu = 0;
    double sigma = 0.3;
    double vertical_gain = 0;
    bool operator==(const LogNormalScale&) const = default;
};

using ScaleLaw = std::variant<ConstantScale, LinearInY, LogNormalScale>;

struct UniformVertical {
    bool operator==(const UniformVertical&) const = default;
};

/// Normalized vertical band: center and std in [0,1] image-height units.
struct Band {
    double center = 0.5;
    double width = 0.1;
    double weight = 1.0;
    bool operator==(const Band&) const = default;
};

struct BandedVertical {
    std::vector<Band> bands;
    bool operator==(const BandedVertical&) const = default;
};

using VerticalLaw = std::variant<UniformVertical, BandedVertical>;

struct SceneConfig {
    int width = 1024;
    int height = 768;
    /// Poisson rate of the object count.
    double lambda = 100;
    ScaleLaw scale_law = ConstantScale{};
    VerticalLaw vertical_law = UniformVertical{};
    /// Std of the multiplicative log-normal scale noise.
    double jitter = 0;
    /// Shape of a gamma prior on lambda (negative-binomial counts); 0 keeps plain Poisson.
    double gamma_shape = 0;

    bool operator==(const SceneConfig&) const = default;
};

void validate(const SceneConfig& cfg);

/// Per-object oracle channel.
struct ObjectLabel {
    /// Vertical band index; -1 marks an injected outlier.
    int component = 0;
    /// Scale law value before jitter and clamping.
    double true_scale = 0;
};

struct SceneSample {
    ImageRecord image;
    std::vector<ObjectLabel> labels;
};

struct SyntheticBundle {
    DatasetBundle bundle;
    /// labels[i][j] belongs to bundle.images[i].boxes[j].
    std::vector<std::vector<ObjectLabel>> labels;
};

SceneSample sample_scene(const SceneConfig& cfg, std::uint64_t seed, const std::string& id = "scene");

/// Scene i is drawn with derive_seed(seed, i).
SyntheticBundle sample_bundle(const SceneConfig& cfg, std::size_t n_scenes, std::uint64_t seed,
                              const std::string& name);

/// Two domains that differ only in scale law (enforced).
std::pair<SyntheticBundle, SyntheticBundle> make_domain_pair(const SceneConfig& a, const SceneConfig& b,
                                                             std::size_t n_scenes, std::uint64_t seed);

struct CorpusConfig {
    /// Per-scene mean scale is log-uniform over this range (px^2).
    double min_mean_scale = 50;
    double max_mean_scale = 5000;
    /// Scale at the top of the image relative to the scene mean; bottom is 2 - this.
    double top_scale_ratio = 0.4;
    /// lambda = base.lambda * (mean / min_mean_scale)^(-count_exponent) * exp(count_noise * z).
    double count_exponent = 0.45;
    double count_noise = 0.3;
    /// Probability that a scene carries one oversized outlier head.
    double outlier_prob = 0.3;
    double outlier_factor = 150;
};

void validate(const CorpusConfig& cfg);

/// Scenes sweeping a continuous mean-scale range with perspective (scale linear in y)
/// and counts falling with scale.
SyntheticBundle make_benchmark_corpus(const SceneConfig& base, const CorpusConfig& corpus, std::size_t n_scenes,
                                      std::uint64_t seed);

/// Sidecar oracle file: one line per image with per-box generating labels.
void write_oracle(std::ostream& out, const SyntheticBundle& bundle);

}  // namespace scaleforge
