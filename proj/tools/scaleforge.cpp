#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "scaleforge/error.hpp"
#include "scaleforge/evalloc.hpp"
#include "scaleforge/io.hpp"
#include "scaleforge/log.hpp"
#include "scaleforge/parallel.hpp"
#include "scaleforge/partition.hpp"
#include "scaleforge/pipeline.hpp"
#include "scaleforge/regularize.hpp"
#include "scaleforge/shift.hpp"
#include "scaleforge/simrfs.hpp"
#include "scaleforge/stats.hpp"

namespace fs = std::filesystem;
using namespace scaleforge;

namespace {

struct Common {
    std::string out = ".";
    std::uint64_t seed = 0;
    unsigned threads = default_threads();
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

fs::path output_dir(const Common& c) {
    fs::path dir(c.out);
    fs::create_directories(dir);
    return dir;
}

void announce(const fs::path& path) { std::cout << path.string() << '\n'; }

void save(const fs::path& path, const Json& doc) {
    write_json(path, doc);
    announce(path);
}

void save_dataset(const fs::path& path, const DatasetBundle& bundle) {
    write_dataset(path, bundle);
    announce(path);
}

void save_oracle(const fs::path& path, const SyntheticBundle& bundle) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_oracle(out, bundle);
    announce(path);
}

DatasetFormat format_from(const std::string& name) {
    return name == "csv" ? DatasetFormat::CsvPointsBoxes : DatasetFormat::NativeJson;
}

std::size_t box_total(const DatasetBundle& b) {
    std::size_t n = 0;
    for (const auto& im : b.images) n += im.boxes.size();
    return n;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    Common common;
    std::string input;
    std::string format = "native";
    std::string name;
    double point_box_side = 16.0;
};

int run_ingest(const IngestArgs& a) {
    ParseOptions opts;
    opts.point_box_side = a.point_box_side;
    std::ifstream in(a.input, std::ios::binary);
    if (!in) throw scaleforge::ParseError("cannot open " + a.input, 0);
    const std::string name = a.name.empty() ? fs::path(a.input).stem().string() : a.name;
    const auto ingested = ingest_dataset(in, format_from(a.format), name, opts);
    const auto dir = output_dir(a.common);
    save_dataset(dir / "dataset.jsonl", ingested.bundle);

    const Json config{{"command", "ingest"}, {"input", a.input}, {"format", a.format}, {"name", name},
                      {"point_box_side", a.point_box_side}};
    auto doc = report_header("ingest", config);
    doc["images"] = ingested.bundle.images.size();
    doc["boxes"] = box_total(ingested.bundle);
    doc["clamped_boxes"] = ingested.clamped_boxes;
    doc["synthetic_boxes"] = ingested.synthetic_boxes;
    save(dir / "ingest.json", doc);
    return 0;
}

// ------------------------------------------------------------ regularize

struct RegularizeArgs {
    Common common;
    std::string dataset;
    int components = 5;
    std::string preset = "main-text";
    bool no_filter = false;
    double min_object_height = 0.0;
};

int run_regularize(const RegularizeArgs& a) {
    RegularizeConfig cfg;
    cfg.em.components = a.components;
    cfg.em.seed = a.common.seed;
    cfg.filter = a.preset == "appendix" ? FilterConfig::appendix_preset() : FilterConfig{};
    cfg.filter.min_object_height = a.min_object_height;
    cfg.apply_filter = !a.no_filter;
    cfg.threads = a.common.threads;
    validate(cfg.em);
    validate(cfg.filter);

    const auto bundle = parse_dataset(a.dataset, DatasetFormat::NativeJson);
    spdlog::info("regularizing {} images with K={}", bundle.images.size(), a.components);
    const auto result = regularize_bundle(bundle, cfg);
    spdlog::info("kept {} patches, rejected {}", result.kept.size(), result.rejected.size());

    const Json config{{"command", "regularize"}, {"dataset", a.dataset}, {"K", a.components},
                      {"filter_preset", a.preset}, {"filter", !a.no_filter},
                      {"min_object_height", a.min_object_height}, {"seed", a.common.seed}};
    auto doc = report_header("patches", config);
    doc["result"] = to_json(result);
    save(output_dir(a.common) / "patches.json", doc);
    return 0;
}

// ------------------------------------------------------------- partition

struct PartitionArgs {
    Common common;
    std::string patches;
    int domains = 4;
    PartitionConfig cfg;
};

std::vector<Patch> load_patches(const std::string& path) {
    return kept_patches_from_json(read_report(path, "patches").at("result"));
}

BenchmarkManifest load_manifest(const std::string& path) {
    return manifest_from_json(read_report(path, "manifest").at("manifest"));
}

int run_partition(const PartitionArgs& a) {
    validate(a.cfg);
    const auto patches = load_patches(a.patches);
    const auto manifest = build_benchmark(patches, a.domains, a.cfg, a.common.seed);
    if (!manifest.sigma_feasible) spdlog::warn("no sigma assignment met the balance bound; fell back to the best found");

    const Json config{{"command", "partition"}, {"patches", a.patches}, {"M", a.domains},
                      {"epsilon", a.cfg.epsilon}, {"val_fraction", a.cfg.val_fraction},
                      {"sigma_grid_points", a.cfg.sigma_grid_points}, {"pdf_bins", a.cfg.pdf_bins},
                      {"seed", a.common.seed}};
    const auto dir = output_dir(a.common);
    auto doc = report_header("manifest", config);
    doc["manifest"] = to_json(manifest);
    save(dir / "manifest.json", doc);

    auto trials = report_header("trials", config);
    trials["trials"] = Json::array();
    for (const auto& t : leave_one_out_trials(manifest)) trials["trials"].push_back(to_json(t));
    save(dir / "trials.json", trials);
    return 0;
}

// ----------------------------------------------------------------- shift

struct ShiftArgs {
    Common common;
    std::string patches;
    std::string manifest;
    std::string dataset_a;
    std::string dataset_b;
    Eigen::Index bins = 256;
    std::string source = "patch-mean";
};

int run_shift(const ShiftArgs& a) {
    if (a.bins < 1) throw ContractError("--bins must be >= 1");
    const auto dir = output_dir(a.common);
    if (!a.dataset_a.empty() || !a.dataset_b.empty()) {
        if (a.dataset_a.empty() || a.dataset_b.empty()) throw ContractError("--dataset-a and --dataset-b go together");
        const auto da = parse_dataset(a.dataset_a, DatasetFormat::NativeJson);
        const auto db = parse_dataset(a.dataset_b, DatasetFormat::NativeJson);
        const Json config{{"command", "shift"}, {"dataset_a", a.dataset_a}, {"dataset_b", a.dataset_b},
                          {"bins", a.bins}};
        auto doc = report_header("shift-pair", config);
        doc["report"] = to_json(bundle_shift(da, db, a.bins));
        save(dir / "shift.json", doc);
        return 0;
    }
    if (a.patches.empty() || a.manifest.empty()) {
        throw ContractError("shift needs --patches with --manifest, or --dataset-a with --dataset-b");
    }
    const auto source = a.source == "objects" ? ScaleSource::Objects : ScaleSource::PatchMean;
    const auto patches = load_patches(a.patches);
    const auto manifest = load_manifest(a.manifest);
    const auto matrix = shift_matrix(manifest, patches, a.bins, source);
    const auto m = manifest.domains.size();

    const Json config{{"command", "shift"}, {"patches", a.patches}, {"manifest", a.manifest},
                      {"bins", a.bins}, {"source", a.source}};
    auto doc = report_header("shift-matrix", config);
    doc["domains"] = Json::array();
    for (const auto& d : manifest.domains) doc["domains"].push_back(d.name);
    doc["matrix"] = Json::array();
    for (std::size_t i = 0; i < m; ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m; ++j) row.push_back(to_json(matrix[i * m + j]));
        doc["matrix"].push_back(std::move(row));
    }
    doc["adjacent_kl"] = Json::array();
    for (std::size_t i = 0; i + 1 < m; ++i) doc["adjacent_kl"].push_back(matrix[i * m + i + 1].kl);
    save(dir / "shift.json", doc);
    return 0;
}

// ----------------------------------------------------------------- stats

struct StatsArgs {
    Common common;
    std::string dataset;
    Eigen::Index bins = 64;
    bool include_synthetic = false;
};

int run_stats(const StatsArgs& a) {
    if (a.bins < 1) throw ContractError("--bins must be >= 1");
    const auto bundle = parse_dataset(a.dataset, DatasetFormat::NativeJson);
    const auto corr = scale_position_correlations(bundle, a.include_synthetic);
    const auto rho = count_scale_spearman(bundle);

    std::vector<double> scales;
    for (const auto& im : bundle.images) {
        for (const auto& b : im.boxes) {
            if (!b.synthetic || a.include_synthetic) scales.push_back(scale_of(b));
        }
    }
    const Json config{{"command", "stats"}, {"dataset", a.dataset}, {"bins", a.bins},
                      {"include_synthetic", a.include_synthetic}};
    auto doc = report_header("stats", config);
    doc["images"] = bundle.images.size();
    doc["image_ids"] = corr.image_ids;
    doc["skipped_images"] = corr.skipped_images;
    doc["scale_vertical"] = to_json(corr.vertical);
    doc["scale_horizontal"] = to_json(corr.horizontal);
    doc["vertical_horizontal"] = to_json(corr.vh);
    doc["count_scale_spearman"] = rho ? Json(*rho) : Json(nullptr);
    if (!scales.empty()) {
        const auto [lo, hi] = std::minmax_element(scales.begin(), scales.end());
        doc["scale_histogram"] = to_json(histogram(scales, linear_edges(*lo, *hi, a.bins)));
    } else {
        doc["scale_histogram"] = nullptr;
    }
    save(output_dir(a.common) / "stats.json", doc);
    return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
    Common common;
    std::string dataset;
    std::string predictions;
    std::string patches;
    std::string manifest;
    std::string trial;
};

struct EvalUnit {
    std::string id;
    std::vector<BoxAnnotation> gts;
    std::vector<PredictedPoint> preds;
};

int run_eval(const EvalArgs& a) {
    const auto bundle = parse_dataset(a.dataset, DatasetFormat::NativeJson);
    const auto preds = parse_predictions(fs::path(a.predictions));
    std::set<std::string> ids;
    for (const auto& im : bundle.images) ids.insert(im.id);
    validate_predictions(preds, ids);

    const auto points_of = [&](const std::string& id) {
        const auto it = preds.find(id);
        return it == preds.end() ? std::vector<PredictedPoint>{} : it->second;
    };

    std::vector<EvalUnit> units;
    if (a.trial.empty()) {
        for (const auto& im : bundle.images) units.push_back({im.id, im.boxes, points_of(im.id)});
    } else {
        if (a.patches.empty() || a.manifest.empty()) throw ContractError("--trial needs --patches and --manifest");
        const auto patches = load_patches(a.patches);
        const auto manifest = load_manifest(a.manifest);
        const auto trials = leave_one_out_trials(manifest);
        const auto trial = std::find_if(trials.begin(), trials.end(), [&](const Trial& t) { return t.target == a.trial; });
        if (trial == trials.end()) throw ContractError("unknown trial target: " + a.trial);
        std::map<std::string, const Patch*> by_id;
        for (const auto& p : patches) by_id[p.id()] = &p;
        for (const auto& pid : trial->test) {
            const auto it = by_id.find(pid);
            if (it == by_id.end()) throw ContractError("manifest names a patch missing from --patches: " + pid);
            const Patch& p = *it->second;
            if (!ids.contains(p.image_id)) throw ContractError("patch image missing from --dataset: " + p.image_id);
            EvalUnit u{pid, p.objects, {}};
            for (const auto& pt : points_of(p.image_id)) {
                if (pt.y >= p.y_top && pt.y < p.y_bottom) u.preds.push_back(pt);
            }
            units.push_back(std::move(u));
        }
    }

    std::vector<MatchResult> results(units.size());
    parallel_for(units.size(), a.common.threads,
                 [&](std::size_t i) { results[i] = match_predictions(units[i].preds, units[i].gts); });
    std::vector<CountPair> counts;
    std::vector<ConfidenceRecord> records;
    for (std::size_t i = 0; i < units.size(); ++i) {
        counts.push_back({units[i].preds.size(), units[i].gts.size()});
        std::vector<bool> matched(units[i].preds.size(), false);
        for (const auto& pair : results[i].pairs) matched[pair.pred] = true;
        for (std::size_t k = 0; k < units[i].preds.size(); ++k) {
            records.push_back({units[i].preds[k].confidence, matched[k]});
        }
    }

    const Json config{{"command", "eval"}, {"dataset", a.dataset}, {"predictions", a.predictions},
                      {"patches", a.patches}, {"manifest", a.manifest}, {"trial", a.trial}};
    auto doc = report_header("eval", config);
    doc["units"] = units.size();
    doc["metrics"] = to_json(localization_metrics(results, counts));
    doc["calibration"] = records.empty() ? Json(nullptr) : to_json(ece(records));
    save(output_dir(a.common) / "eval.json", doc);
    return 0;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
    Common common;
    bool pair = false;
    bool corpus = false;
    bool null_pair = false;
    std::size_t n = 10000;
    TheoremConfig theorem;
    int width = 1920;
    int height = 1080;
    double lambda = 60;
};

int run_synth(SynthArgs a) {
    if (a.pair == a.corpus) throw ContractError("synth needs exactly one of --pair or --corpus");
    const auto dir = output_dir(a.common);
    Json config{{"command", "synth"}, {"n", a.n}, {"seed", a.common.seed}};
    if (a.pair) {
        a.theorem.objects = a.n;
        a.theorem.seed = a.common.seed;
        validate(a.theorem);
        const auto [sa, sb] = theorem_pair(a.theorem, a.null_pair);
        save_dataset(dir / "A.jsonl", sa.bundle);
        save_dataset(dir / "B.jsonl", sb.bundle);
        save_oracle(dir / "A.oracle.jsonl", sa);
        save_oracle(dir / "B.oracle.jsonl", sb);
        config["mode"] = a.null_pair ? "null-pair" : "pair";
        config["mu"] = a.theorem.mu;
        config["mu_shift"] = a.null_pair ? 0.0 : a.theorem.mu_shift;
        config["sigma"] = a.theorem.sigma;
        config["vertical_gain"] = a.theorem.vertical_gain;
        config["lambda"] = a.theorem.lambda;
        auto doc = report_header("synth", config);
        doc["datasets"] = {{{"name", sa.bundle.name}, {"images", sa.bundle.images.size()}, {"objects", box_total(sa.bundle)}},
                           {{"name", sb.bundle.name}, {"images", sb.bundle.images.size()}, {"objects", box_total(sb.bundle)}}};
        save(dir / "synth.json", doc);
        return 0;
    }
    SceneConfig base;
    base.width = a.width;
    base.height = a.height;
    base.lambda = a.lambda;
    const auto corpus = make_benchmark_corpus(base, CorpusConfig{}, a.n, a.common.seed);
    save_dataset(dir / "corpus.jsonl", corpus.bundle);
    save_oracle(dir / "corpus.oracle.jsonl", corpus);
    config["mode"] = "corpus";
    config["width"] = a.width;
    config["height"] = a.height;
    config["lambda"] = a.lambda;
    auto doc = report_header("synth", config);
    doc["datasets"] = {{{"name", corpus.bundle.name}, {"images", corpus.bundle.images.size()},
                        {"objects", box_total(corpus.bundle)}}};
    save(dir / "synth.json", doc);
    return 0;
}

// -------------------------------------------------------- verify-theorem

struct TheoremArgs {
    Common common;
    TheoremConfig cfg;
};

Json side_json(const TheoremSide& s) {
    return Json{{"report", to_json(s.report)}, {"se", {{"div_div", s.se.div_div}, {"div_cor", s.se.div_cor}}}};
}

int run_theorem(TheoremArgs a) {
    a.cfg.seed = a.common.seed;
    validate(a.cfg);
    const auto check = verify_theorem(a.cfg);
    const Json config{{"command", "verify-theorem"}, {"objects", a.cfg.objects}, {"mu", a.cfg.mu},
                      {"mu_shift", a.cfg.mu_shift}, {"sigma", a.cfg.sigma}, {"vertical_gain", a.cfg.vertical_gain},
                      {"lambda", a.cfg.lambda}, {"bins", a.cfg.bins}, {"resamples", a.cfg.resamples},
                      {"label_classes", a.cfg.label_classes}, {"null_bound", a.cfg.null_bound},
                      {"se_multiple", a.cfg.se_multiple}, {"seed", a.cfg.seed}};
    auto doc = report_header("theorem", config);
    doc["shifted"] = side_json(check.shifted);
    doc["null"] = side_json(check.null);
    doc["shifted_ok"] = check.shifted_ok;
    doc["null_ok"] = check.null_ok;
    doc["passed"] = check.passed();
    save(output_dir(a.common) / "theorem.json", doc);
    return check.passed() ? 0 : 1;
}

// ---------------------------------------------------------------- errors

void emit_error(const Json& record) { std::cerr << record.dump() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"scaleforge: scale-shift benchmark construction and evaluation"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Parse, validate and rewrite a dataset as a native manifest");
    add_common(c_ingest, ingest.common);
    c_ingest->add_option("--input", ingest.input, "Dataset file")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--format", ingest.format)->check(CLI::IsMember({"native", "csv"}))->capture_default_str();
    c_ingest->add_option("--name", ingest.name, "Bundle name (defaults to the file stem)");
    c_ingest->add_option("--point-box-side", ingest.point_box_side)->capture_default_str();

    RegularizeArgs reg;
    auto* c_reg = app.add_subcommand("regularize", "Fit per-image mixtures, cut patches and filter them");
    add_common(c_reg, reg.common);
    c_reg->add_option("--dataset", reg.dataset)->required()->check(CLI::ExistingFile);
    c_reg->add_option("--K", reg.components, "Mixture components per image")->capture_default_str();
    c_reg->add_option("--filter-preset", reg.preset)->check(CLI::IsMember({"main-text", "appendix"}))->capture_default_str();
    c_reg->add_flag("--no-filter", reg.no_filter, "Keep every patch");
    c_reg->add_option("--min-object-height", reg.min_object_height)->capture_default_str();

    PartitionArgs part;
    auto* c_part = app.add_subcommand("partition", "Build domains and leave-one-out trials from patches");
    add_common(c_part, part.common);
    c_part->add_option("--patches", part.patches)->required()->check(CLI::ExistingFile);
    c_part->add_option("--M", part.domains, "Number of domains")->capture_default_str();
    c_part->add_option("--epsilon", part.cfg.epsilon)->capture_default_str();
    c_part->add_option("--val-fraction", part.cfg.val_fraction)->capture_default_str();
    c_part->add_option("--sigma-grid", part.cfg.sigma_grid_points)->capture_default_str();
    c_part->add_option("--bins", part.cfg.pdf_bins, "Bins of the stored domain PDFs")->capture_default_str();

    ShiftArgs shift;
    auto* c_shift = app.add_subcommand("shift", "Divergences between domains or between two datasets");
    add_common(c_shift, shift.common);
    c_shift->add_option("--patches", shift.patches)->check(CLI::ExistingFile);
    c_shift->add_option("--manifest", shift.manifest)->check(CLI::ExistingFile);
    c_shift->add_option("--dataset-a", shift.dataset_a)->check(CLI::ExistingFile);
    c_shift->add_option("--dataset-b", shift.dataset_b)->check(CLI::ExistingFile);
    c_shift->add_option("--bins", shift.bins)->capture_default_str();
    c_shift->add_option("--source", shift.source, "Domain samples: patch means or objects")
        ->check(CLI::IsMember({"patch-mean", "objects"}))
        ->capture_default_str();

    StatsArgs stats;
    auto* c_stats = app.add_subcommand("stats", "Scale/position correlations and the scale histogram");
    add_common(c_stats, stats.common);
    c_stats->add_option("--dataset", stats.dataset)->required()->check(CLI::ExistingFile);
    c_stats->add_option("--bins", stats.bins)->capture_default_str();
    c_stats->add_flag("--include-synthetic", stats.include_synthetic);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Localization metrics and calibration for a prediction file");
    add_common(c_eval, ev.common);
    c_eval->add_option("--dataset", ev.dataset)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--predictions", ev.predictions)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--patches", ev.patches)->check(CLI::ExistingFile);
    c_eval->add_option("--manifest", ev.manifest)->check(CLI::ExistingFile);
    c_eval->add_option("--trial", ev.trial, "Target domain of a leave-one-out trial");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a domain pair or a benchmark corpus");
    add_common(c_synth, synth.common);
    c_synth->add_flag("--pair", synth.pair, "Scale-only domain pair; --n counts objects per side");
    c_synth->add_flag("--corpus", synth.corpus, "Benchmark corpus; --n counts scenes");
    c_synth->add_flag("--null", synth.null_pair, "Both sides of the pair use the same scale law");
    c_synth->add_option("--n", synth.n)->capture_default_str();
    c_synth->add_option("--mu", synth.theorem.mu)->capture_default_str();
    c_synth->add_option("--mu-shift", synth.theorem.mu_shift)->capture_default_str();
    c_synth->add_option("--sigma", synth.theorem.sigma)->capture_default_str();
    c_synth->add_option("--width", synth.width)->capture_default_str();
    c_synth->add_option("--height", synth.height)->capture_default_str();
    c_synth->add_option("--lambda", synth.lambda, "Mean objects per scene")->capture_default_str();

    TheoremArgs thm;
    thm.common.seed = thm.cfg.seed;
    auto* c_thm = app.add_subcommand("verify-theorem", "Check that a scale-only shift yields both divergences");
    add_common(c_thm, thm.common);
    c_thm->add_option("--objects", thm.cfg.objects)->capture_default_str();
    c_thm->add_option("--resamples", thm.cfg.resamples)->capture_default_str();
    c_thm->add_option("--bins", thm.cfg.bins)->capture_default_str();
    c_thm->add_option("--mu-shift", thm.cfg.mu_shift)->capture_default_str();
    c_thm->add_option("--sigma", thm.cfg.sigma)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error({{"error", "usage"}, {"message", e.what()}});
        return 2;
    }

    try {
        if (c_ingest->parsed()) return run_ingest(ingest);
        if (c_reg->parsed()) return run_regularize(reg);
        if (c_part->parsed()) return run_partition(part);
        if (c_shift->parsed()) return run_shift(shift);
        if (c_stats->parsed()) return run_stats(stats);
        if (c_eval->parsed()) return run_eval(ev);
        if (c_synth->parsed()) return run_synth(synth);
        if (c_thm->parsed()) return run_theorem(thm);
    } catch (const scaleforge::ParseError& e) {
        emit_error({{"error", "parse"}, {"message", e.what()}, {"line", e.line()}});
        return 2;
    } catch (const ValidationError& e) {
        Json violations = Json::array();
        for (const auto& v : e.violations()) violations.push_back({{"image_id", v.image_id}, {"rule", v.rule}});
        emit_error({{"error", "validation"}, {"message", e.what()}, {"violations", violations}});
        return 2;
    } catch (const ContractError& e) {
        emit_error({{"error", "contract"}, {"message", e.what()}});
        return 2;
    } catch (const BuildError& e) {
        emit_error({{"error", "build"}, {"message", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        emit_error({{"error", "runtime"}, {"message", e.what()}});
        return 1;
    }
    return 0;
}
