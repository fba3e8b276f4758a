#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scaleforge/evalloc.hpp"
#include "scaleforge/io.hpp"
#include "scaleforge/mixture.hpp"
#include "scaleforge/partition.hpp"
#include "scaleforge/pipeline.hpp"
#include "scaleforge/regularize.hpp"
#include "scaleforge/shift.hpp"
#include "scaleforge/simrfs.hpp"
#include "scaleforge/stats.hpp"

using namespace scaleforge;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ------------------------------------------------------------ pipeline run

SceneConfig corpus_base() {
    SceneConfig base;
    base.width = 1920;
    base.height = 1080;
    base.lambda = 60;
    return base;
}

constexpr std::size_t kCorpusScenes = 8000;
constexpr std::uint64_t kCorpusSeed = 11;

struct PipelineRun {
    double seconds = 0;
    DatasetBundle corpus;
    std::vector<Patch> patches;
    BenchmarkManifest manifest;
    std::vector<ShiftReport> matrix;
    std::string corpus_text;
    std::string patches_text;
    std::string manifest_text;
    std::string shift_text;
};

std::string dataset_text(const DatasetBundle& b) {
    std::ostringstream out;
    write_dataset(out, b);
    return out.str();
}

std::string shift_text(const std::vector<ShiftReport>& matrix) {
    Json j = Json::array();
    for (const auto& r : matrix) j.push_back(to_json(r));
    return j.dump(1);
}

PipelineRun run_pipeline(unsigned threads, bool filter) {
    PipelineRun run;
    const auto t0 = Clock::now();
    run.corpus = make_benchmark_corpus(corpus_base(), CorpusConfig{}, kCorpusScenes, kCorpusSeed).bundle;
    run.corpus_text = dataset_text(run.corpus);

    RegularizeConfig rc;
    rc.em.seed = kCorpusSeed;
    rc.threads = threads;
    rc.apply_filter = filter;
    const auto reg = regularize_bundle(run.corpus, rc);
    run.patches = reg.kept;
    run.patches_text = to_json(reg).dump(1);

    run.manifest = build_benchmark(run.patches, 4, PartitionConfig{}, kCorpusSeed);
    run.manifest_text = to_json(run.manifest).dump(1);

    run.matrix = shift_matrix(run.manifest, run.patches, 256, ScaleSource::Objects);
    run.shift_text = shift_text(run.matrix);
    run.seconds = seconds_since(t0);
    return run;
}

// ------------------------------------------------------------------- AC1

Outcome ac1_theorem() {
    const auto t0 = Clock::now();
    const auto check = verify_theorem(TheoremConfig{});
    const double secs = seconds_since(t0);
    const auto& s = check.shifted;
    const auto& n = check.null;
    Outcome o;
    o.pass = check.passed() && secs < 10.0;
    o.detail = fmt("shifted div_div=%.4f (se %.4f) div_cor=%.4f (se %.4f); null div_div=%.4f div_cor=%.4f; %.2fs",
                   s.report.div_div, s.se.div_div, s.report.div_cor, s.se.div_cor, n.report.div_div,
                   n.report.div_cor, secs);
    return o;
}

// ------------------------------------------------------------------- AC2

Outcome ac2_bounds() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(1, 400);
    std::uniform_int_distribution<int> labels(1, 6);
    std::uniform_int_distribution<int> bins(1, 128);
    std::uniform_real_distribution<double> mu(0, 6);
    std::uniform_real_distribution<double> sd(0.05, 2);
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = labels(rng);
        std::uniform_int_distribution<int> label(0, k - 1);
        auto draw = [&](double m, double s) {
            std::lognormal_distribution<double> ln(m, s);
            LabeledScaleSamples out;
            out.label_count = k;
            const int n = size(rng);
            for (int i = 0; i < n; ++i) {
                out.scales.push_back(ln(rng));
                out.labels.push_back(label(rng));
            }
            return out;
        };
        const auto a = draw(mu(rng), sd(rng));
        const auto b = draw(mu(rng), sd(rng));
        const auto r = shift_report(a, b, bins(rng));
        const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(r.div_div) || !in_unit(r.div_cor) || !in_unit(r.div_div_disjoint)) ++violations;
    }

    LabeledScaleSamples lo{{1, 2, 3, 4}, {0, 1, 0, 1}, 2};
    LabeledScaleSamples hi{{50, 60, 70}, {1, 1, 0}, 2};
    const auto d = shift_report(lo, hi, 64);
    Outcome o;
    o.pass = violations == 0 && d.div_div == 1.0 && d.div_cor == 0.0;
    o.detail = fmt("1000 random pairs, %zu out of [0,1]; disjoint pair div_div=%.17g div_cor=%.17g", violations,
                   d.div_div, d.div_cor);
    return o;
}

// ------------------------------------------------------------------- AC3

Outcome ac3_quantiles() {
    const std::size_t n = 256000;
    std::vector<double> uniform(n);
    for (std::size_t i = 0; i < n; ++i) uniform[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const auto ub = equal_mass_boundaries(uniform, 4);
    double uerr = 0;
    for (int i = 0; i < 3; ++i) uerr = std::max(uerr, std::abs(ub[static_cast<std::size_t>(i)] - 0.25 * (i + 1)));

    std::mt19937_64 rng(5);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> ex(100000);
    for (auto& v : ex) v = e(rng);
    const auto eb = equal_mass_boundaries(ex, 4);
    const double truth[3] = {-std::log(0.75), -std::log(0.5), -std::log(0.25)};
    double eerr = 0;
    for (int i = 0; i < 3; ++i) eerr = std::max(eerr, std::abs(eb[static_cast<std::size_t>(i)] - truth[i]));

    Outcome o;
    o.pass = ub.size() == 3 && eb.size() == 3 && uerr <= 1e-6 && eerr <= 0.02;
    o.detail = fmt("uniform max error %.2e; Exp(1) max error %.4f", uerr, eerr);
    return o;
}

// ------------------------------------------------------------------- AC4

Outcome ac4_balance(const PipelineRun& a, const PipelineRun& b) {
    const auto& m = a.manifest;
    std::size_t total = 0, lo = std::numeric_limits<std::size_t>::max(), hi = 0;
    bool increasing = true;
    for (std::size_t d = 0; d < m.domains.size(); ++d) {
        const auto count = m.domains[d].patch_ids.size();
        total += count;
        lo = std::min(lo, count);
        hi = std::max(hi, count);
        if (d > 0 && !(m.domains[d].mean_scale > m.domains[d - 1].mean_scale)) increasing = false;
    }
    const double imbalance = total > 0 ? static_cast<double>(hi - lo) / static_cast<double>(total) : 1.0;
    const bool identical = a.manifest_text == b.manifest_text;
    Outcome o;
    o.pass = m.domains.size() == 4 && imbalance <= 0.02 && increasing && identical;
    std::string means;
    for (const auto& d : m.domains) means += fmt("%.0f ", d.mean_scale);
    o.detail = fmt("retained %zu..%zu of %zu, imbalance %.4f; mean scales %s; manifests %s", lo, hi, total, imbalance,
                   means.c_str(), identical ? "byte-identical" : "DIFFER");
    return o;
}

// ------------------------------------------------------------------- AC5

Outcome ac5_filtering(const PipelineRun& filtered, const PipelineRun& unfiltered) {
    const std::size_t m = filtered.manifest.domains.size();
    bool larger = m == unfiltered.manifest.domains.size() && m >= 2;
    std::string pairs;
    for (std::size_t i = 0; larger && i + 1 < m; ++i) {
        const double with = filtered.matrix[i * m + i + 1].kl;
        const double without = unfiltered.matrix[i * m + i + 1].kl;
        if (!(with > without)) larger = false;
        pairs += fmt("%zu-%zu %.3f->%.3f ", i, i + 1, without, with);
    }
    Outcome o;
    o.pass = larger;
    o.detail = "adjacent KL without->with filtering: " + pairs;
    return o;
}

// ------------------------------------------------------------------- AC6

Outcome ac6_gmm() {
    struct Fixture {
        double w0;
        double m0[2];
        double m1[2];
        double sigma;
    };
    // Separations of 14 and 5 standard deviations.
    const Fixture fixtures[] = {{0.4, {0.3, 0.25}, {0.6, 0.75}, 0.04}, {0.35, {0.5, 0.375}, {0.5, 0.625}, 0.05}};
    double mean_err = 0, weight_err = 0;
    bool monotone = true, deterministic = true;
    int fits = 0;
    for (const auto& f : fixtures) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            std::mt19937_64 rng(derive_seed(seed, 99));
            std::normal_distribution<double> g(0, f.sigma);
            std::bernoulli_distribution first(f.w0);
            const Eigen::Index n = 3000;
            Points2<double> pts(n, 2);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double* m = first(rng) ? f.m0 : f.m1;
                pts(i, 0) = m[0] + g(rng);
                pts(i, 1) = m[1] + g(rng);
            }
            EmConfig cfg;
            cfg.components = 2;
            cfg.seed = seed;
            const auto fit = fit_gmm_2d(pts, cfg);
            const auto again = fit_gmm_2d(pts, cfg);
            ++fits;
            if (fit.model.components() != 2) {
                mean_err = std::numeric_limits<double>::infinity();
                continue;
            }
            const double* truth[2] = {f.m0, f.m1};
            const double weights[2] = {f.w0, 1 - f.w0};
            for (int k = 0; k < 2; ++k) {
                mean_err = std::max(mean_err, std::abs(fit.model.means(0, k) - truth[k][0]));
                mean_err = std::max(mean_err, std::abs(fit.model.means(1, k) - truth[k][1]));
                weight_err = std::max(weight_err, std::abs(fit.model.weights[k] - weights[k]));
            }
            for (std::size_t i = 1; i < fit.trace.size(); ++i) {
                if (fit.trace_components[i] == fit.trace_components[i - 1] && fit.trace[i] < fit.trace[i - 1] - 1e-8) {
                    monotone = false;
                }
            }
            if (fit.trace != again.trace || fit.model.means != again.model.means) deterministic = false;
        }
    }
    Outcome o;
    o.pass = mean_err <= 0.02 && weight_err <= 0.05 && monotone && deterministic;
    o.detail = fmt("%d fits: max mean error %.4f, max weight error %.4f, traces %s, %s", fits, mean_err, weight_err,
                   monotone ? "non-decreasing" : "DECREASE", deterministic ? "deterministic" : "NOT deterministic");
    return o;
}

// ------------------------------------------------------------------- AC7

struct Best {
    std::size_t tp = 0;
    double distance = 0;
};

void enumerate(const std::vector<PredictedPoint>& preds, const std::vector<BoxAnnotation>& gts, std::size_t i,
               std::vector<bool>& used, std::size_t tp, double dist, Best& best) {
    if (i == preds.size()) {
        if (tp > best.tp || (tp == best.tp && dist < best.distance)) best = {tp, dist};
        return;
    }
    enumerate(preds, gts, i + 1, used, tp, dist, best);
    for (std::size_t j = 0; j < gts.size(); ++j) {
        if (used[j]) continue;
        const double d = std::hypot(preds[i].x - gts[j].center_x(), preds[i].y - gts[j].center_y());
        if (d > std::hypot(gts[j].w, gts[j].h)) continue;
        used[j] = true;
        enumerate(preds, gts, i + 1, used, tp + 1, dist + d, best);
        used[j] = false;
    }
}

Outcome ac7_matching() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> count(0, 6);
    std::uniform_real_distribution<double> pos(0, 60);
    std::uniform_real_distribution<double> size(1, 12);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<PredictedPoint> preds(static_cast<std::size_t>(count(rng)));
        std::vector<BoxAnnotation> gts(static_cast<std::size_t>(count(rng)));
        for (auto& p : preds) p = {pos(rng), pos(rng), 0.5};
        for (auto& g : gts) g = {pos(rng), pos(rng), size(rng), size(rng)};
        Best best{0, std::numeric_limits<double>::infinity()};
        std::vector<bool> used(gts.size(), false);
        enumerate(preds, gts, 0, used, 0, 0.0, best);
        const auto r = match_predictions(preds, gts);
        const double total = r.total_distance();
        const bool same_distance = best.tp == 0 ? total == 0.0 : std::abs(total - best.distance) <= 1e-9 * (1 + best.distance);
        if (r.tp != best.tp || !same_distance) ++mismatches;
    }
    const std::vector<BoxAnnotation> box{{0, 0, 6, 8}};
    const std::vector<PredictedPoint> on{{13, 4, 1}};
    const std::vector<PredictedPoint> past{{3 + std::nextafter(10.0, 20.0), 4, 1}};
    const bool on_matches = match_predictions(on, box).tp == 1;
    const bool past_misses = match_predictions(past, box).tp == 0;
    Outcome o;
    o.pass = mismatches == 0 && on_matches && past_misses;
    o.detail = fmt("500 brute-force instances, %zu mismatches; distance = diagonal %s, diagonal + ulp %s", mismatches,
                   on_matches ? "matches" : "DOES NOT match", past_misses ? "does not match" : "MATCHES");
    return o;
}

// ------------------------------------------------------------------- AC8

Outcome ac8_metrics() {
    std::vector<MatchResult> results(3);
    results[0].tp = 3, results[0].fp = 1, results[0].fn = 0;
    results[1].tp = 0, results[1].fp = 0, results[1].fn = 2;
    const std::vector<CountPair> counts{{4, 3}, {0, 2}, {0, 0}};
    const auto m = localization_metrics(results, counts);
    // Hand values: P = 3/4, R = 3/5, F1 = 2/3, MAE = 1, RMSE = sqrt(5/3), NAE = (1/3 + 1)/2.
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    bool ok = close(m.precision, 0.75) && close(m.recall, 0.6) && close(m.f1, 2.0 / 3.0) && close(m.mae, 1.0) &&
              close(m.mse, std::sqrt(5.0 / 3.0)) && m.nae && close(*m.nae, 2.0 / 3.0);

    const std::vector<CountPair> errs{{13, 10}, {6, 10}};
    const auto c = localization_metrics(std::vector<MatchResult>(2), errs);
    ok = ok && close(c.mae, 3.5) && close(c.mse, std::sqrt(12.5));

    const std::vector<ConfidenceRecord> single{{0.95, true}, {0.95, true}, {0.95, false}, {0.95, false}};
    const double e1 = ece(single).ece;
    std::vector<ConfidenceRecord> calibrated;
    for (int i = 0; i < 100; ++i) calibrated.push_back({0.75, i % 4 != 0});
    const double e2 = ece(calibrated).ece;
    // 0.95 - 0.5 in binary is the double nearest 0.45 up to one rounding.
    const bool ece_ok = std::abs(e1 - 0.45) <= 1e-15 && e2 == 0.0;
    Outcome o;
    o.pass = ok && ece_ok;
    o.detail = fmt("fixture P=%.12f R=%.12f F1=%.12f MAE=%.12f MSE=%.12f NAE=%.12f; ECE single bin %.17g, calibrated %.17g",
                   m.precision, m.recall, m.f1, m.mae, m.mse, m.nae.value_or(-1), e1, e2);
    return o;
}

// ------------------------------------------------------------------- AC9

Outcome ac9_correlations(const PipelineRun& run) {
    SceneConfig cfg;
    cfg.lambda = 60;
    cfg.scale_law = LinearInY{1500, 50};
    cfg.jitter = 0.1;
    const auto b = sample_bundle(cfg, 1000, 9, "lin");
    std::size_t eligible = 0, strong = 0;
    double horizontal = 0;
    std::size_t horizontal_n = 0;
    for (const auto& im : b.bundle.images) {
        if (im.boxes.size() < 30) continue;
        std::vector<double> s, y, x;
        for (const auto& box : im.boxes) {
            s.push_back(scale_of(box));
            y.push_back(box.center_y());
            x.push_back(box.center_x());
        }
        ++eligible;
        const auto pv = pearson(s, y);
        if (pv && *pv > 0.9) ++strong;
        if (const auto ph = pearson(s, x)) {
            horizontal += *ph;
            ++horizontal_n;
        }
    }
    const double frac = eligible ? static_cast<double>(strong) / static_cast<double>(eligible) : 0.0;
    const double hmean = horizontal_n ? horizontal / static_cast<double>(horizontal_n) : 1.0;
    const auto rho = count_scale_spearman(run.corpus);
    Outcome o;
    o.pass = eligible > 0 && frac >= 0.95 && std::abs(hmean) <= 0.1 && rho && *rho >= -0.95 && *rho <= -0.6;
    o.detail = fmt("vertical Pearson > 0.9 in %.1f%% of %zu scenes; horizontal mean %.4f; count-scale Spearman %.4f",
                   100 * frac, eligible, hmean, rho.value_or(std::nan("")));
    return o;
}

// ------------------------------------------------------------------ AC10

Outcome ac10_end_to_end(const PipelineRun& a, const PipelineRun& b) {
    const bool identical = a.corpus_text == b.corpus_text && a.patches_text == b.patches_text &&
                           a.manifest_text == b.manifest_text && a.shift_text == b.shift_text;
    Outcome o;
    o.pass = identical && a.seconds < 60.0 && b.seconds < 60.0;
    o.detail = fmt("%zu scenes, %zu patches; run 1 (1 thread) %.2fs, run 2 (4 threads) %.2fs; artifacts %s",
                   a.corpus.images.size(), a.patches.size(), a.seconds, b.seconds,
                   identical ? "byte-identical" : "DIFFER");
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    const auto report = [&](const char* name, const std::function<Outcome()>& fn) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("[%s] %s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    };

    report("AC1 theorem:", ac1_theorem);
    report("AC2 divergence bounds:", ac2_bounds);
    report("AC3 equal-mass partition:", ac3_quantiles);

    PipelineRun first, second, unfiltered;
    bool pipeline_ok = true;
    std::string pipeline_error;
    try {
        first = run_pipeline(1, true);
        second = run_pipeline(4, true);
        unfiltered = run_pipeline(1, false);
    } catch (const std::exception& e) {
        pipeline_ok = false;
        pipeline_error = e.what();
    }
    const auto needs_pipeline = [&](auto fn) {
        return [=, &first, &second, &unfiltered]() -> Outcome {
            if (!pipeline_ok) return {false, "pipeline failed: " + pipeline_error};
            return fn(first, second, unfiltered);
        };
    };

    report("AC4 balance:", needs_pipeline([](const PipelineRun& a, const PipelineRun& b, const PipelineRun&) {
               return ac4_balance(a, b);
           }));
    report("AC5 filtering:", needs_pipeline([](const PipelineRun& a, const PipelineRun&, const PipelineRun& u) {
               return ac5_filtering(a, u);
           }));
    report("AC6 GMM recovery:", ac6_gmm);
    report("AC7 matching:", ac7_matching);
    report("AC8 metrics:", ac8_metrics);
    report("AC9 correlations:", needs_pipeline([](const PipelineRun& a, const PipelineRun&, const PipelineRun&) {
               return ac9_correlations(a);
           }));
    report("AC10 end-to-end:", needs_pipeline([](const PipelineRun& a, const PipelineRun& b, const PipelineRun&) {
               return ac10_end_to_end(a, b);
           }));

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
