#include "scaleforge/simrfs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include <json.hpp>

#include "scaleforge/error.hpp"
#include "scaleforge/rng.hpp"

namespace scaleforge {
namespace {

struct LawEval {
    double y_norm;
    double operator()(const ConstantScale& s) const { return s.c0; }
    double operator()(const LinearInY& s) const { return s.a * y_norm + s.b; }
    double operator()(const LogNormalScale&) const { return 0; }  // sampled separately
};

// Square box of area c centered near (x_norm W, y_norm H), shifted so it fits the image.
BoxAnnotation place_box(double c, double x_norm, double y_norm, int width, int height) {
    const double W = width;
    const double H = height;
    const double side = std::min(std::sqrt(c), std::min(W, H));
    BoxAnnotation box;
    box.x = std::clamp(x_norm * W - 0.5 * side, 0.0, W - side);
    box.y = std::clamp(y_norm * H - 0.5 * side, 0.0, H - side);
    box.w = side;
    box.h = side;
    if (box.x + box.w > W) box.w = W - box.x;
    if (box.y + box.h > H) box.h = H - box.y;
    return box;
}

std::string scene_id(const std::string& prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%06zu", prefix.c_str(), i);
    return buf;
}

}  // namespace

void validate(const SceneConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0) throw ContractError("SceneConfig: image size must be positive");
    if (!(cfg.lambda >= 0) || !std::isfinite(cfg.lambda)) throw ContractError("SceneConfig: lambda must be >= 0");
    if (!(cfg.jitter >= 0)) throw ContractError("SceneConfig: jitter must be >= 0");
    if (!(cfg.gamma_shape >= 0)) throw ContractError("SceneConfig: gamma_shape must be >= 0");
    if (const auto* s = std::get_if<ConstantScale>(&cfg.scale_law); s && !(s->c0 > 0)) {
        throw ContractError("SceneConfig: constant scale must be > 0");
    }
    if (const auto* s = std::get_if<LinearInY>(&cfg.scale_law); s && !(s->b > 0 && s->a + s->b > 0)) {
        throw ContractError("SceneConfig: linear scale law must stay positive on [0,1]");
    }
    if (const auto* s = std::get_if<LogNormalScale>(&cfg.scale_law); s && !(s->sigma >= 0)) {
        throw ContractError("SceneConfig: lognormal sigma must be >= 0");
    }
    if (const auto* v = std::get_if<BandedVertical>(&cfg.vertical_law)) {
        if (v->bands.empty()) throw ContractError("SceneConfig: banded law needs at least one band");
        double total = 0;
        for (const auto& b : v->bands) {
            if (!(b.weight >= 0) || !(b.width > 0)) throw ContractError("SceneConfig: invalid band");
            total += b.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ContractError("SceneConfig: band weights must sum to 1");
    }
}

SceneSample sample_scene(const SceneConfig& cfg, std::uint64_t seed, const std::string& id) {
    validate(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    double lambda = cfg.lambda;
    if (cfg.gamma_shape > 0 && lambda > 0) {
        lambda = std::gamma_distribution<double>(cfg.gamma_shape, lambda / cfg.gamma_shape)(rng);
    }
    std::size_t count = 0;
    if (lambda > 0) count = static_cast<std::size_t>(std::poisson_distribution<long long>(lambda)(rng));

    SceneSample scene;
    scene.image.id = id;
    scene.image.width = cfg.width;
    scene.image.height = cfg.height;
    scene.image.boxes.reserve(count);
    scene.labels.reserve(count);
    const auto* banded = std::get_if<BandedVertical>(&cfg.vertical_law);
    for (std::size_t i = 0; i < count; ++i) {
        int component = 0;
        double y = unit(rng);
        if (banded) {
            const double pick = unit(rng);
            double acc = 0;
            component = static_cast<int>(banded->bands.size()) - 1;
            for (std::size_t b = 0; b < banded->bands.size(); ++b) {
                acc += banded->bands[b].weight;
                if (pick < acc) {
                    component = static_cast<int>(b);
                    break;
                }
            }
            const Band& band = banded->bands[static_cast<std::size_t>(component)];
            y = band.center + band.width * normal(rng);
            for (int tries = 0; (y < 0 || y >= 1) && tries < 64; ++tries) y = band.center + band.width * normal(rng);
            y = std::clamp(y, 0.0, std::nextafter(1.0, 0.0));
        }
        const double x = unit(rng);
        double true_scale = 0;
        if (const auto* ln = std::get_if<LogNormalScale>(&cfg.scale_law)) {
            true_scale = std::exp(ln->mu + ln->sigma * normal(rng) + ln->vertical_gain * (y - 0.5));
        } else {
            true_scale = std::visit(LawEval{y}, cfg.scale_law);
        }
        const double c = cfg.jitter > 0 ? true_scale * std::exp(cfg.jitter * normal(rng)) : true_scale;
        scene.image.boxes.push_back(place_box(c, x, y, cfg.width, cfg.height));
        scene.labels.push_back({component, true_scale});
    }
    return scene;
}

SyntheticBundle sample_bundle(const SceneConfig& cfg, std::size_t n_scenes, std::uint64_t seed,
                              const std::string& name) {
    SyntheticBundle out;
    out.bundle.name = name;
    for (std::size_t i = 0; i < n_scenes; ++i) {
        auto scene = sample_scene(cfg, derive_seed(seed, i), scene_id(name, i));
        scene.image.meta["source"] = "simrfs";
        out.bundle.images.push_back(std::move(scene.image));
        out.labels.push_back(std::move(scene.labels));
    }
    return out;
}

std::pair<SyntheticBundle, SyntheticBundle> make_domain_pair(const SceneConfig& a, const SceneConfig& b,
                                                             std::size_t n_scenes, std::uint64_t seed) {
    SceneConfig b_with_a_law = b;
    b_with_a_law.scale_law = a.scale_law;
    if (!(b_with_a_law == a)) throw ContractError("make_domain_pair: configs may differ only in scale law");
    return {sample_bundle(a, n_scenes, derive_seed(seed, 0), "A"), sample_bundle(b, n_scenes, derive_seed(seed, 1), "B")};
}

void validate(const CorpusConfig& cfg) {
    if (!(cfg.min_mean_scale > 0 && cfg.max_mean_scale >= cfg.min_mean_scale)) {
        throw ContractError("CorpusConfig: invalid mean-scale range");
    }
    if (!(cfg.top_scale_ratio > 0 && cfg.top_scale_ratio < 2)) {
        throw ContractError("CorpusConfig: top_scale_ratio must be in (0,2)");
    }
    if (!(cfg.outlier_prob >= 0 && cfg.outlier_prob <= 1)) throw ContractError("CorpusConfig: outlier_prob in [0,1]");
    if (!(cfg.outlier_factor > 0)) throw ContractError("CorpusConfig: outlier_factor must be > 0");
    if (!(cfg.count_noise >= 0)) throw ContractError("CorpusConfig: count_noise must be >= 0");
}

SyntheticBundle make_benchmark_corpus(const SceneConfig& base, const CorpusConfig& corpus, std::size_t n_scenes,
                                      std::uint64_t seed) {
    validate(base);
    validate(corpus);
    SyntheticBundle out;
    out.bundle.name = "corpus";
    const double log_lo = std::log(corpus.min_mean_scale);
    const double log_hi = std::log(corpus.max_mean_scale);
    for (std::size_t i = 0; i < n_scenes; ++i) {
        std::mt19937_64 rng(derive_seed(seed, i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double mean = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
        const double noise = normal(rng);

        SceneConfig cfg = base;
        const double r = corpus.top_scale_ratio;
        cfg.scale_law = LinearInY{2.0 * (1.0 - r) * mean, r * mean};
        cfg.lambda = base.lambda * std::pow(mean / corpus.min_mean_scale, -corpus.count_exponent) *
                     std::exp(corpus.count_noise * noise);
        auto scene = sample_scene(cfg, rng(), scene_id("img", i));
        if (unit(rng) < corpus.outlier_prob) {
            const double y = unit(rng);
            const double x = unit(rng);
            const double c = corpus.outlier_factor * mean;
            scene.image.boxes.push_back(place_box(c, x, y, cfg.width, cfg.height));
            scene.labels.push_back({-1, c});
        }
        scene.image.meta["source"] = "simrfs";
        out.bundle.images.push_back(std::move(scene.image));
        out.labels.push_back(std::move(scene.labels));
    }
    return out;
}

void write_oracle(std::ostream& out, const SyntheticBundle& bundle) {
    for (std::size_t i = 0; i < bundle.bundle.images.size(); ++i) {
        nlohmann::json labels = nlohmann::json::array();
        for (const auto& l : bundle.labels[i]) labels.push_back({{"component", l.component}, {"true_scale", l.true_scale}});
        out << nlohmann::json{{"id", bundle.bundle.images[i].id}, {"labels", std::move(labels)}}.dump() << '\n';
    }
}

}  // namespace scaleforge
