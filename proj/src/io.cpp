#include "scaleforge/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "scaleforge/error.hpp"

namespace scaleforge {
namespace {

Json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const Json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// JSON has no infinity; an unbounded kernel width is written as null.
Json sigma_json(double s) { return std::isinf(s) ? Json(nullptr) : Json(s); }
double sigma_from(const Json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

}  // namespace

Json report_header(const std::string& schema, const Json& config) {
    return Json{{"schema", schema},
                {"schema_version", kReportSchemaVersion},
                {"toolkit_version", kToolkitVersion},
                {"config", config}};
}

Json read_report(const std::filesystem::path& path, const std::string& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    if (doc.value("schema", "") != schema) {
        throw ParseError(path.string() + ": expected schema '" + schema + "'", 0);
    }
    if (doc.value("schema_version", 0) != kReportSchemaVersion) {
        throw ParseError(path.string() + ": unsupported schema_version", 0);
    }
    return doc;
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(1) << '\n';
}

Json to_json(const EmpiricalDistribution& d) {
    return Json{{"edges", vec(d.edges)},
                {"mass", vec(d.mass)},
                {"n_samples", d.n_samples},
                {"clipped_low", d.clipped_low},
                {"clipped_high", d.clipped_high}};
}

EmpiricalDistribution distribution_from_json(const Json& j) {
    EmpiricalDistribution d;
    d.edges = vec_from(j.at("edges"));
    d.mass = vec_from(j.at("mass"));
    d.n_samples = j.at("n_samples").get<std::size_t>();
    d.clipped_low = j.value("clipped_low", std::size_t{0});
    d.clipped_high = j.value("clipped_high", std::size_t{0});
    return d;
}

Json to_json(const GmmModel1D& m) {
    return Json{{"weights", vec(m.weights)}, {"means", vec(m.means)}, {"stds", vec(m.stds)}};
}

Json to_json(const GmmModel2D& m) {
    Json comps = Json::array();
    for (Eigen::Index k = 0; k < m.components(); ++k) {
        const auto& c = m.covariances[static_cast<std::size_t>(k)];
        comps.push_back({{"weight", m.weights[k]},
                         {"mean", {m.means(0, k), m.means(1, k)}},
                         {"covariance", {c(0, 0), c(0, 1), c(1, 0), c(1, 1)}}});
    }
    return comps;
}

GmmModel2D gmm2d_from_json(const Json& j) {
    GmmModel2D m;
    const auto k = static_cast<Eigen::Index>(j.size());
    m.weights.resize(k);
    m.means.resize(2, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& c = j.at(static_cast<std::size_t>(i));
        m.weights[i] = c.at("weight").get<double>();
        const auto mean = c.at("mean").get<std::vector<double>>();
        m.means.col(i) << mean.at(0), mean.at(1);
        const auto cov = c.at("covariance").get<std::vector<double>>();
        GmmModel2D::Matrix2 s;
        s << cov.at(0), cov.at(1), cov.at(2), cov.at(3);
        m.covariances.push_back(s);
    }
    return m;
}

Json to_json(const BoxAnnotation& b) {
    Json j{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
    if (b.synthetic) j["synthetic_box"] = true;
    return j;
}

BoxAnnotation box_from_json(const Json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>(),
            j.value("synthetic_box", false)};
}

Json to_json(const Patch& p) {
    Json objects = Json::array();
    for (const auto& b : p.objects) objects.push_back(to_json(b));
    return Json{{"id", p.id()},
                {"image_id", p.image_id},
                {"index", p.index},
                {"y_top", p.y_top},
                {"y_bottom", p.y_bottom},
                {"mean_scale", p.mean_scale},
                {"std_scale", p.std_scale},
                {"source_component", p.source_component},
                {"objects", std::move(objects)}};
}

Patch patch_from_json(const Json& j) {
    Patch p;
    p.image_id = j.at("image_id").get<std::string>();
    p.index = j.at("index").get<int>();
    p.y_top = j.at("y_top").get<double>();
    p.y_bottom = j.at("y_bottom").get<double>();
    p.source_component = j.at("source_component").get<Eigen::Index>();
    for (const auto& b : j.at("objects")) p.objects.push_back(box_from_json(b));
    update_scale_moments(p);
    return p;
}

Json to_json(const RegularizeResult& r) {
    Json kept = Json::array();
    for (const auto& p : r.kept) kept.push_back(to_json(p));
    Json rejected = Json::array();
    for (const auto& rej : r.rejected) rejected.push_back({{"patch", to_json(rej.patch)}, {"reasons", rej.reasons}});
    Json images = Json::array();
    for (const auto& img : r.images) {
        Json j{{"id", img.image_id}, {"patches", img.patches}, {"dropped_objects", img.dropped_objects}};
        if (!img.skipped_reason.empty()) j["skipped_reason"] = img.skipped_reason;
        if (img.model.components() > 0) j["model"] = to_json(img.model);
        images.push_back(std::move(j));
    }
    return Json{{"patches", std::move(kept)}, {"rejected", std::move(rejected)}, {"images", std::move(images)}};
}

std::vector<Patch> kept_patches_from_json(const Json& doc) {
    std::vector<Patch> out;
    for (const auto& p : doc.at("patches")) out.push_back(patch_from_json(p));
    return out;
}

Json to_json(const BenchmarkManifest& m) {
    Json domains = Json::array();
    for (std::size_t i = 0; i < m.domains.size(); ++i) {
        const auto& d = m.domains[i];
        domains.push_back({{"name", d.name},
                           {"interval", {d.interval.lo, d.interval.hi}},
                           {"sigma", sigma_json(d.sigma)},
                           {"members_before_reshaping", d.members_before},
                           {"mean_scale", d.mean_scale},
                           {"patch_ids", d.patch_ids},
                           {"reshaped_pdf", to_json(d.reshaped_pdf)},
                           {"train", m.splits[i].train},
                           {"val", m.splits[i].val}});
    }
    return Json{{"M", m.domain_count},
                {"seed", m.seed},
                {"boundaries", m.boundaries},
                {"sigma_feasible", m.sigma_feasible},
                {"imbalance", m.imbalance},
                {"epsilon", m.config.epsilon},
                {"val_fraction", m.config.val_fraction},
                {"sigma_grid_points", m.config.sigma_grid_points},
                {"pdf_bins", m.config.pdf_bins},
                {"domains", std::move(domains)},
                {"dropped_region", m.dropped_region}};
}

BenchmarkManifest manifest_from_json(const Json& j) {
    BenchmarkManifest m;
    m.domain_count = j.at("M").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.boundaries = j.at("boundaries").get<std::vector<double>>();
    m.sigma_feasible = j.at("sigma_feasible").get<bool>();
    m.imbalance = j.at("imbalance").get<double>();
    m.config.epsilon = j.at("epsilon").get<double>();
    m.config.val_fraction = j.at("val_fraction").get<double>();
    m.config.sigma_grid_points = j.at("sigma_grid_points").get<int>();
    m.config.pdf_bins = j.at("pdf_bins").get<Eigen::Index>();
    for (const auto& d : j.at("domains")) {
        DomainSpec spec;
        spec.name = d.at("name").get<std::string>();
        const auto iv = d.at("interval").get<std::vector<double>>();
        spec.interval = {iv.at(0), iv.at(1)};
        spec.sigma = sigma_from(d.at("sigma"));
        spec.members_before = d.at("members_before_reshaping").get<std::size_t>();
        spec.mean_scale = d.at("mean_scale").get<double>();
        spec.patch_ids = d.at("patch_ids").get<std::vector<std::string>>();
        spec.reshaped_pdf = distribution_from_json(d.at("reshaped_pdf"));
        m.splits.push_back({d.at("train").get<std::vector<std::string>>(), d.at("val").get<std::vector<std::string>>()});
        m.domains.push_back(std::move(spec));
    }
    m.dropped_region = j.at("dropped_region").get<std::vector<std::string>>();
    return m;
}

Json to_json(const Trial& t) {
    return Json{{"target", t.target}, {"sources", t.sources}, {"train", t.train}, {"val", t.val}, {"test", t.test}};
}

Json to_json(const ShiftReport& r) {
    return Json{{"div_div", r.div_div},
                {"div_div_disjoint_support", r.div_div_disjoint},
                {"div_cor", r.div_cor},
                {"kl", r.kl},
                {"bins", r.bins},
                {"n1", r.n1},
                {"n2", r.n2},
                {"undefined_conditional_bins", r.undefined_bins},
                {"label_proxy", r.label_proxy}};
}

Json to_json(const CorrelationSummary& s) {
    Json coefficients = Json::array();
    for (const auto& c : s.coefficients) coefficients.push_back(c ? Json(*c) : Json("undefined"));
    return Json{{"mean", s.mean ? Json(*s.mean) : Json(nullptr)},
                {"undefined", s.undefined},
                {"coefficients", std::move(coefficients)},
                {"histogram", to_json(s.histogram)}};
}

Json to_json(const LocMetrics& m) {
    return Json{{"f1", m.f1},
                {"precision", m.precision},
                {"recall", m.recall},
                {"mae", m.mae},
                {"mse", m.mse},
                {"nae", m.nae ? Json(*m.nae) : Json(nullptr)},
                {"macro_f1", m.macro_f1},
                {"macro_precision", m.macro_precision},
                {"macro_recall", m.macro_recall},
                {"images", m.images}};
}

Json to_json(const CalibrationReport& r) {
    Json bins = Json::array();
    for (const auto& b : r.bins) {
        bins.push_back({{"count", b.count}, {"mean_confidence", b.mean_confidence}, {"precision", b.precision}});
    }
    return Json{{"ece", r.ece}, {"n", r.n}, {"bins", std::move(bins)}};
}

}  // namespace scaleforge
