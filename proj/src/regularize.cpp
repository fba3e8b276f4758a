#include "scaleforge/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scaleforge/error.hpp"
#include "scaleforge/parallel.hpp"
#include "scaleforge/rng.hpp"

namespace scaleforge {
namespace {

std::vector<BoxAnnotation> usable_boxes(const ImageRecord& image) {
    std::vector<BoxAnnotation> out;
    for (const auto& b : image.boxes) {
        if (!b.synthetic) out.push_back(b);
    }
    return out;
}

struct Group {
    Eigen::Index first_component = 0;
    double weight = 0;
    double weighted_y = 0;
    std::vector<std::size_t> members;
    bool alive = true;

    double mean_y() const { return weight > 0 ? weighted_y / weight : 0.0; }
};

struct Span {
    double top = 0;
    double bottom = 0;
    double mean_y_px = 0;
    Eigen::Index component = 0;
};

}  // namespace

void update_scale_moments(Patch& patch) {
    if (patch.objects.empty()) {
        patch.mean_scale = 0;
        patch.std_scale = 0;
        return;
    }
    const auto n = static_cast<double>(patch.objects.size());
    double sum = 0;
    for (const auto& b : patch.objects) sum += scale_of(b);
    const double mean = sum / n;
    double ss = 0;
    for (const auto& b : patch.objects) ss += (scale_of(b) - mean) * (scale_of(b) - mean);
    patch.mean_scale = mean;
    patch.std_scale = std::sqrt(ss / n);
}

FilterConfig FilterConfig::appendix_preset() {
    FilterConfig cfg;
    cfg.rule = VarianceRule::VarianceOverMean;
    cfg.sigma_ratio = 2.0;
    return cfg;
}

void validate(const FilterConfig& cfg) {
    if (!(cfg.min_height > 0)) throw ContractError("FilterConfig: min_height must be > 0");
    if (!(cfg.sigma_ratio > 0)) throw ContractError("FilterConfig: sigma_ratio must be > 0");
    if (cfg.weight_floor < 0 || cfg.weight_floor >= 1) {
        throw ContractError("FilterConfig: weight_floor must be in [0,1)");
    }
    if (cfg.min_object_height < 0) throw ContractError("FilterConfig: min_object_height must be >= 0");
    if (cfg.merge_separation < 0) throw ContractError("FilterConfig: merge_separation must be >= 0");
}

Points2<double> normalize_features(const ImageRecord& image) {
    const auto boxes = usable_boxes(image);
    if (boxes.empty()) throw ContractError("normalize_features: image " + image.id + " has no boxes");
    double max_scale = 0;
    for (const auto& b : boxes) max_scale = std::max(max_scale, scale_of(b));
    Points2<double> out(static_cast<Eigen::Index>(boxes.size()), 2);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out(r, 0) = scale_of(boxes[i]) / max_scale;
        out(r, 1) = boxes[i].center_y() / image.height;
    }
    return out;
}

SegmentResult segment_image(const ImageRecord& image, const GmmModel2D& model, const FilterConfig& cfg) {
    validate(cfg);
    SegmentResult result;
    const auto boxes = usable_boxes(image);
    const Points2<double> features = normalize_features(image);
    const Eigen::Index k = model.components();
    if (k < 1) throw ContractError("segment_image: empty model");

    // Components are visited in vertical-mean order; neighbours that sit within
    // merge_separation pooled stds of each other form one group.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return model.means(1, a) < model.means(1, b); });
    std::vector<std::size_t> group_of(static_cast<std::size_t>(k));
    std::vector<Group> groups;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const Eigen::Index c = order[pos];
        bool merge = false;
        if (pos > 0) {
            const Eigen::Index prev = order[pos - 1];
            const double var_a = model.covariances[static_cast<std::size_t>(prev)](1, 1);
            const double var_b = model.covariances[static_cast<std::size_t>(c)](1, 1);
            const double pooled = std::sqrt(0.5 * (var_a + var_b));
            merge = std::abs(model.means(1, c) - model.means(1, prev)) < cfg.merge_separation * pooled;
        }
        if (!merge) {
            groups.push_back({});
            groups.back().first_component = c;
        } else {
            ++result.merged_components;
        }
        groups.back().weight += model.weights[c];
        groups.back().weighted_y += model.weights[c] * model.means(1, c);
        group_of[static_cast<std::size_t>(c)] = groups.size() - 1;
    }

    const MatrixX<double> resp = responsibilities(model, features);
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
        Eigen::Index best = 0;
        resp.row(i).maxCoeff(&best);  // first maximum: ties go to the lower index
        groups[group_of[static_cast<std::size_t>(best)]].members.push_back(static_cast<std::size_t>(i));
    }

    std::vector<std::size_t> orphans;
    for (auto& g : groups) {
        if (g.weight < cfg.weight_floor || g.members.size() < cfg.min_objects) {
            g.alive = false;
            ++result.pruned_components;
            orphans.insert(orphans.end(), g.members.begin(), g.members.end());
            g.members.clear();
        }
    }
    std::vector<std::size_t> alive;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        if (groups[gi].alive) alive.push_back(gi);
    }
    if (alive.empty()) {
        result.diagnostic = "all " + std::to_string(groups.size()) +
                            " component group(s) fell below weight_floor/min_objects";
        result.dropped_objects = boxes.size();
        return result;
    }
    for (std::size_t i : orphans) {
        const double y = features(static_cast<Eigen::Index>(i), 1);
        std::size_t nearest = alive.front();
        for (std::size_t gi : alive) {
            if (std::abs(y - groups[gi].mean_y()) < std::abs(y - groups[nearest].mean_y())) nearest = gi;
        }
        groups[nearest].members.push_back(i);
    }

    const double height = image.height;
    std::vector<Span> spans;
    for (std::size_t gi : alive) {
        const auto& g = groups[gi];
        double lo = height;
        double hi = 0;
        double margin = 0;
        for (std::size_t i : g.members) {
            lo = std::min(lo, boxes[i].center_y());
            hi = std::max(hi, boxes[i].center_y());
            margin += boxes[i].h;
        }
        margin /= static_cast<double>(g.members.size());
        spans.push_back({std::max(0.0, lo - margin), std::min(height, hi + margin), g.mean_y() * height,
                         g.first_component});
    }

    // Overlapping neighbours are separated at the midpoint of their vertical means.
    std::vector<bool> live(spans.size(), true);
    for (std::size_t g = 1; g < spans.size(); ++g) {
        std::size_t p = g;
        while (p > 0 && !live[--p]) {}
        if (!live[p] || p == g) continue;
        Span& a = spans[p];
        Span& b = spans[g];
        if (b.top < a.bottom && a.top < b.bottom) {
            const double lower = std::max(a.top, b.top);
            const double upper = std::min(a.bottom, b.bottom);
            const double cut = std::clamp(0.5 * (a.mean_y_px + b.mean_y_px), lower, upper);
            a.bottom = cut;
            b.top = cut;
            if (!(a.bottom > a.top)) live[p] = false;
            if (!(b.bottom > b.top)) live[g] = false;
        }
    }
    std::vector<Span> final_spans;
    for (std::size_t g = 0; g < spans.size(); ++g) {
        if (live[g]) final_spans.push_back(spans[g]);
    }
    std::stable_sort(final_spans.begin(), final_spans.end(),
                     [](const Span& a, const Span& b) { return a.top < b.top; });
    std::vector<Span> disjoint;
    for (auto s : final_spans) {
        if (!disjoint.empty()) s.top = std::max(s.top, disjoint.back().bottom);
        if (s.bottom > s.top) disjoint.push_back(s);
    }

    std::vector<Patch> patches(disjoint.size());
    for (std::size_t s = 0; s < disjoint.size(); ++s) {
        patches[s].image_id = image.id;
        patches[s].y_top = disjoint[s].top;
        patches[s].y_bottom = disjoint[s].bottom;
        patches[s].source_component = disjoint[s].component;
    }
    for (const auto& b : boxes) {
        const double cy = b.center_y();
        auto it = std::find_if(disjoint.begin(), disjoint.end(),
                               [&](const Span& s) { return s.top <= cy && cy < s.bottom; });
        if (it == disjoint.end()) {
            ++result.dropped_objects;
            continue;
        }
        patches[static_cast<std::size_t>(it - disjoint.begin())].objects.push_back(b);
    }
    int index = 0;
    for (auto& p : patches) {
        if (p.objects.empty()) continue;
        p.index = index++;
        update_scale_moments(p);
        result.patches.push_back(std::move(p));
    }
    return result;
}

FilterResult filter_patches(std::vector<Patch> patches, const FilterConfig& cfg) {
    validate(cfg);
    FilterResult out;
    for (auto& patch : patches) {
        if (cfg.min_object_height > 0) {
            std::erase_if(patch.objects, [&](const BoxAnnotation& b) { return b.h < cfg.min_object_height; });
            update_scale_moments(patch);
        }
        std::vector<std::string> reasons;
        if (patch.objects.empty()) reasons.emplace_back("empty");
        if (patch.height() < cfg.min_height) reasons.emplace_back("height");
        const double spread = cfg.rule == VarianceRule::StdOverMean ? patch.std_scale
                                                                   : patch.std_scale * patch.std_scale;
        if (spread > cfg.sigma_ratio * patch.mean_scale) reasons.emplace_back("variance");
        if (reasons.empty()) {
            out.kept.push_back(std::move(patch));
        } else {
            out.rejected.push_back({std::move(patch), std::move(reasons)});
        }
    }
    return out;
}

RegularizeResult regularize_bundle(const DatasetBundle& bundle, const RegularizeConfig& cfg) {
    validate(cfg.em);
    validate(cfg.filter);
    struct PerImage {
        ImageOutcome outcome;
        FilterResult filtered;
    };
    std::vector<PerImage> slots(bundle.images.size());
    parallel_for(bundle.images.size(), cfg.threads, [&](std::size_t i) {
        const auto& image = bundle.images[i];
        auto& slot = slots[i];
        slot.outcome.image_id = image.id;
        const auto n = static_cast<int>(usable_boxes(image).size());
        if (n == 0) {
            slot.outcome.skipped_reason = "no non-synthetic boxes";
            return;
        }
        EmConfig em = cfg.em;
        em.components = std::min(em.components, n);
        em.seed = derive_seed(cfg.em.seed, i);
        const auto fit = fit_gmm_2d(normalize_features(image), em);
        auto seg = segment_image(image, fit.model, cfg.filter);
        slot.outcome.model = fit.model;
        slot.outcome.dropped_objects = seg.dropped_objects;
        if (seg.patches.empty()) slot.outcome.skipped_reason = seg.diagnostic;
        slot.outcome.patches = seg.patches.size();
        if (cfg.apply_filter) {
            slot.filtered = filter_patches(std::move(seg.patches), cfg.filter);
        } else {
            slot.filtered.kept = std::move(seg.patches);
        }
    });
    RegularizeResult result;
    for (auto& slot : slots) {
        result.images.push_back(std::move(slot.outcome));
        for (auto& p : slot.filtered.kept) result.kept.push_back(std::move(p));
        for (auto& r : slot.filtered.rejected) result.rejected.push_back(std::move(r));
    }
    return result;
}

}  // namespace scaleforge
