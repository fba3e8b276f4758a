#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "scaleforge/error.hpp"
#include "scaleforge/io.hpp"

using namespace scaleforge;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("scaleforge_io_" + name);
}

std::vector<Patch> random_patches(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> scale(std::log(300.0), 1.0);
    std::uniform_real_distribution<double> pos(0, 500);
    std::vector<Patch> out;
    for (std::size_t i = 0; i < n; ++i) {
        Patch p;
        p.image_id = "im" + std::to_string(i / 2);
        p.index = static_cast<int>(i % 2);
        p.y_top = 0;
        p.y_bottom = 640 + pos(rng);
        p.source_component = static_cast<Eigen::Index>(i % 3);
        for (int k = 0; k < 3; ++k) {
            const double s = std::sqrt(scale(rng));
            p.objects.push_back({pos(rng), pos(rng), s, s * 1.25});
        }
        update_scale_moments(p);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

TEST_CASE("report header and schema check") {
    const Json cfg{{"M", 4}, {"seed", 9}};
    auto doc = report_header("shift-matrix", cfg);
    CHECK(doc["schema"] == "shift-matrix");
    CHECK(doc["schema_version"] == kReportSchemaVersion);
    CHECK(doc["toolkit_version"] == kToolkitVersion);
    CHECK(doc["config"] == cfg);

    const auto path = temp_path("header.json");
    write_json(path, doc);
    CHECK(read_report(path, "shift-matrix") == doc);
    CHECK_THROWS_AS(read_report(path, "manifest"), ParseError);

    doc["schema_version"] = kReportSchemaVersion + 1;
    write_json(path, doc);
    CHECK_THROWS_AS(read_report(path, "shift-matrix"), ParseError);

    std::ofstream(path) << "{not json";
    CHECK_THROWS_AS(read_report(path, "shift-matrix"), ParseError);
    std::filesystem::remove(path);
    CHECK_THROWS(read_report(path, "shift-matrix"));
}

TEST_CASE("distribution round trip keeps every bit") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(3, 2);
    std::vector<double> s(1000);
    for (auto& v : s) v = g(rng);
    const auto d = histogram(s, linear_edges(-4, 10, 37));
    const auto back = distribution_from_json(Json::parse(to_json(d).dump()));
    CHECK(back.edges == d.edges);
    CHECK(back.mass == d.mass);
    CHECK(back.n_samples == d.n_samples);
}

TEST_CASE("mixture round trip") {
    GmmModel2D m;
    m.weights = Eigen::Vector3d(0.2, 0.3, 0.5);
    m.means.resize(2, 3);
    m.means << 0.1, -1.0 / 3.0, 2.5, 0.9, 0.45, std::sqrt(2.0);
    for (int k = 0; k < 3; ++k) {
        Eigen::Matrix2d c;
        c << 1.0 + k, 0.1 / 3.0, 0.1 / 3.0, 0.7 + k * std::exp(-1.0);
        m.covariances.push_back(c);
    }
    const auto back = gmm2d_from_json(Json::parse(to_json(m).dump()));
    REQUIRE(back.components() == 3);
    CHECK(back.weights == m.weights);
    CHECK(back.means == m.means);
    for (int k = 0; k < 3; ++k) CHECK(back.covariances[k] == m.covariances[k]);

    GmmModel1D one;
    one.weights = Eigen::Vector2d(0.4, 0.6);
    one.means = Eigen::Vector2d(-1, 1);
    one.stds = Eigen::Vector2d(0.5, 2);
    const auto j = to_json(one);
    CHECK(j["means"][1] == 1.0);
    CHECK(j["stds"][0] == 0.5);
    CHECK(j["weights"].size() == 2);
}

TEST_CASE("box and patch round trip") {
    const BoxAnnotation pseudo{1.5, 2.25, 16, 16, true};
    CHECK(box_from_json(to_json(pseudo)) == pseudo);
    const BoxAnnotation real{0.1, 0.2, 3.3, 4.4, false};
    CHECK(box_from_json(Json::parse(to_json(real).dump())) == real);

    for (const auto& p : random_patches(20, 5)) {
        const auto back = patch_from_json(Json::parse(to_json(p).dump()));
        CHECK(back.id() == p.id());
        CHECK(back.y_top == p.y_top);
        CHECK(back.y_bottom == p.y_bottom);
        CHECK(back.objects == p.objects);
        CHECK(back.mean_scale == p.mean_scale);
        CHECK(back.std_scale == p.std_scale);
        CHECK(back.source_component == p.source_component);
    }
}

TEST_CASE("manifest round trip") {
    const auto patches = random_patches(400, 8);
    const auto m = build_benchmark(patches, 4, PartitionConfig{}, 3);
    const auto j = to_json(m);
    const auto back = manifest_from_json(Json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(back.domain_count == 4);
    CHECK(back.boundaries == m.boundaries);
    CHECK(back.seed == 3);
    REQUIRE(back.domains.size() == 4);
    for (std::size_t d = 0; d < 4; ++d) {
        CHECK(back.domains[d].name == m.domains[d].name);
        CHECK(back.domains[d].patch_ids == m.domains[d].patch_ids);
        CHECK(back.splits[d].train == m.splits[d].train);
        CHECK(back.splits[d].val == m.splits[d].val);
    }
    CHECK(j.dump() == to_json(build_benchmark(patches, 4, PartitionConfig{}, 3)).dump());
}

TEST_CASE("infinite sigma is written as null") {
    BenchmarkManifest m;
    m.domain_count = 1;
    DomainSpec d;
    d.name = "D1";
    d.interval = {1.0, 9.0};
    d.reshaped_pdf = histogram(std::vector<double>{2, 3}, linear_edges(1, 9, 4));
    m.domains.push_back(d);
    m.splits.push_back({{"a#0"}, {}});
    const auto j = to_json(m);
    CHECK(j["domains"][0]["sigma"].is_null());
    const auto back = manifest_from_json(Json::parse(j.dump()));
    CHECK(std::isinf(back.domains[0].sigma));

    m.domains[0].sigma = 2.5;
    CHECK(manifest_from_json(to_json(m)).domains[0].sigma == 2.5);
}

TEST_CASE("kept patches come back from a regularize report") {
    RegularizeResult r;
    r.kept = random_patches(6, 1);
    const auto j = Json::parse(to_json(r).dump());
    const auto kept = kept_patches_from_json(j);
    REQUIRE(kept.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(kept[i].id() == r.kept[i].id());
}

TEST_CASE("report fragments") {
    ShiftReport s;
    s.div_div = 0.25;
    s.div_cor = 0.125;
    s.kl = 1.5;
    const auto sj = to_json(s);
    CHECK(sj["div_div"] == 0.25);
    CHECK(sj["div_cor"] == 0.125);

    LocMetrics m;
    m.f1 = 0.5;
    CHECK(to_json(m)["nae"].is_null());
    m.nae = 0.3;
    CHECK(to_json(m)["nae"] == 0.3);

    const auto cj = to_json(ece(std::vector<ConfidenceRecord>{{0.95, true}, {0.95, false}}));
    CHECK(cj["bins"].size() == 10);
}
