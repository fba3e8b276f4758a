#include "scaleforge/pipeline.hpp"

#include <cmath>
#include <vector>

#include "scaleforge/error.hpp"
#include "scaleforge/rng.hpp"

namespace scaleforge {
namespace {

void collect(const DatasetBundle& bundle, LabeledScaleSamples& out, std::vector<double>& positions) {
    for (const auto& image : bundle.images) {
        for (const auto& box : image.boxes) {
            if (box.synthetic) continue;
            out.scales.push_back(scale_of(box));
            positions.push_back(box.center_y() / image.height);
        }
    }
}

TheoremSide measure(const TheoremConfig& cfg, const std::pair<SyntheticBundle, SyntheticBundle>& pair,
                    std::uint64_t stream) {
    const auto [a, b] = vertical_labeled_samples(pair.first.bundle, pair.second.bundle, cfg.label_classes);
    TheoremSide side;
    side.report = shift_report(a, b, cfg.bins);
    side.report.label_proxy = kVerticalQuartileProxy;
    side.se = bootstrap_errors(a, b, cfg.bins, cfg.resamples, derive_seed(cfg.seed, stream));
    return side;
}

}  // namespace

std::pair<LabeledScaleSamples, LabeledScaleSamples> vertical_labeled_samples(const DatasetBundle& a,
                                                                             const DatasetBundle& b,
                                                                             int classes) {
    if (classes < 1) throw ContractError("label classes must be >= 1");
    LabeledScaleSamples sa, sb;
    std::vector<double> ya, yb;
    collect(a, sa, ya);
    collect(b, sb, yb);
    std::vector<double> pooled = ya;
    pooled.insert(pooled.end(), yb.begin(), yb.end());
    if (pooled.empty()) throw ContractError("bundles contain no boxes");
    const auto thresholds = quantile_thresholds(pooled, classes);
    for (double y : ya) sa.labels.push_back(quantile_class(thresholds, y));
    for (double y : yb) sb.labels.push_back(quantile_class(thresholds, y));
    sa.label_count = sb.label_count = classes;
    return {std::move(sa), std::move(sb)};
}

ShiftReport bundle_shift(const DatasetBundle& a, const DatasetBundle& b, Eigen::Index bins) {
    const auto [sa, sb] = vertical_labeled_samples(a, b);
    ShiftReport report = shift_report(sa, sb, bins);
    report.label_proxy = kVerticalQuartileProxy;
    return report;
}

void validate(const TheoremConfig& cfg) {
    if (cfg.objects < 2) throw ContractError("verify-theorem: objects must be >= 2");
    if (!(cfg.sigma > 0)) throw ContractError("verify-theorem: sigma must be > 0");
    if (!(cfg.lambda > 0)) throw ContractError("verify-theorem: lambda must be > 0");
    if (cfg.bins < 1) throw ContractError("verify-theorem: bins must be >= 1");
    if (cfg.resamples < 2) throw ContractError("verify-theorem: resamples must be >= 2");
    if (cfg.label_classes < 1) throw ContractError("verify-theorem: label classes must be >= 1");
}

SceneConfig theorem_scene(const TheoremConfig& cfg, double mu) {
    SceneConfig scene;
    scene.lambda = cfg.lambda;
    scene.scale_law = LogNormalScale{mu, cfg.sigma, cfg.vertical_gain};
    return scene;
}

void truncate_objects(SyntheticBundle& bundle, std::size_t objects) {
    std::size_t remaining = objects;
    std::size_t keep = 0;
    for (; keep < bundle.bundle.images.size() && remaining > 0; ++keep) {
        auto& boxes = bundle.bundle.images[keep].boxes;
        if (boxes.size() > remaining) {
            boxes.resize(remaining);
            bundle.labels[keep].resize(remaining);
        }
        remaining -= boxes.size();
    }
    if (remaining > 0) throw ContractError("bundle holds fewer objects than requested");
    bundle.bundle.images.resize(keep);
    bundle.labels.resize(keep);
}

std::pair<SyntheticBundle, SyntheticBundle> theorem_pair(const TheoremConfig& cfg, bool null_pair) {
    validate(cfg);
    const SceneConfig a = theorem_scene(cfg, cfg.mu);
    const SceneConfig b = null_pair ? a : theorem_scene(cfg, cfg.mu + cfg.mu_shift);
    const std::uint64_t seed = derive_seed(cfg.seed, null_pair ? 1 : 0);
    auto scenes = static_cast<std::size_t>(std::ceil(1.2 * static_cast<double>(cfg.objects) / cfg.lambda)) + 4;
    for (;;) {
        auto pair = make_domain_pair(a, b, scenes, seed);
        auto count = [](const SyntheticBundle& s) {
            std::size_t n = 0;
            for (const auto& image : s.bundle.images) n += image.boxes.size();
            return n;
        };
        if (count(pair.first) >= cfg.objects && count(pair.second) >= cfg.objects) {
            truncate_objects(pair.first, cfg.objects);
            truncate_objects(pair.second, cfg.objects);
            return pair;
        }
        scenes *= 2;
    }
}

TheoremCheck verify_theorem(const TheoremConfig& cfg) {
    TheoremCheck check;
    check.shifted = measure(cfg, theorem_pair(cfg, false), 2);
    check.null = measure(cfg, theorem_pair(cfg, true), 3);
    const auto& s = check.shifted;
    check.shifted_ok = s.report.div_div > 0 && s.report.div_cor > 0 &&
                       s.report.div_div > cfg.se_multiple * s.se.div_div &&
                       s.report.div_cor > cfg.se_multiple * s.se.div_cor;
    check.null_ok = check.null.report.div_div < cfg.null_bound && check.null.report.div_cor < cfg.null_bound;
    return check;
}

}  // namespace scaleforge
