#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "scaleforge/error.hpp"
#include "scaleforge/evalloc.hpp"

using namespace scaleforge;

namespace {

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

Best brute_force(const std::vector<PredictedPoint>& preds, const std::vector<BoxAnnotation>& gts) {
    Best best{0, std::numeric_limits<double>::infinity()};
    std::vector<bool> used(gts.size(), false);
    enumerate(preds, gts, 0, used, 0, 0.0, best);
    return best;
}

// Coordinates on a 1/8 grid keep translations and power-of-two scalings exact.
std::pair<std::vector<PredictedPoint>, std::vector<BoxAnnotation>> random_instance(std::mt19937_64& rng, int max_n) {
    std::uniform_int_distribution<int> count(0, max_n);
    std::uniform_int_distribution<int> pos(0, 8 * 60);
    std::uniform_int_distribution<int> size(8, 8 * 12);
    std::vector<PredictedPoint> preds(static_cast<std::size_t>(count(rng)));
    std::vector<BoxAnnotation> gts(static_cast<std::size_t>(count(rng)));
    for (auto& p : preds) p = {pos(rng) / 8.0, pos(rng) / 8.0, 0.5};
    for (auto& g : gts) g = {pos(rng) / 8.0, pos(rng) / 8.0, size(rng) / 8.0, size(rng) / 8.0};
    return {preds, gts};
}

void check_invariants(const MatchResult& r, std::span<const PredictedPoint> preds, std::span<const BoxAnnotation> gts) {
    std::vector<int> pred_uses(preds.size()), gt_uses(gts.size());
    for (const auto& pair : r.pairs) {
        ++pred_uses[pair.pred];
        ++gt_uses[pair.gt];
        CHECK(pair.distance <= diagonal_of(gts[pair.gt]));
    }
    for (int u : pred_uses) CHECK(u <= 1);
    for (int u : gt_uses) CHECK(u <= 1);
    CHECK(r.tp == r.pairs.size());
    CHECK(r.fp == preds.size() - r.tp);
    CHECK(r.fn == gts.size() - r.tp);
}

}  // namespace

TEST_CASE("exact hit and near miss") {
    const std::vector<BoxAnnotation> gt{{0, 0, 3, 4}};
    const std::vector<PredictedPoint> hit{{1.5, 2, 0.9}};
    const auto r = match_predictions(hit, gt);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
    CHECK(safe_precision(r.tp, r.fp, r.fn) == 1.0);
    CHECK(safe_recall(r.tp, r.fp, r.fn) == 1.0);

    const std::vector<PredictedPoint> miss{{7.5, 2, 0.9}};
    const auto m = match_predictions(miss, gt);
    CHECK(m.tp == 0);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
}

TEST_CASE("threshold is inclusive at the diagonal") {
    const std::vector<BoxAnnotation> gt{{0, 0, 6, 8}};
    const std::vector<PredictedPoint> on{{13, 4, 1}};
    CHECK(match_predictions(on, gt).tp == 1);
    const std::vector<PredictedPoint> past{{3 + std::nextafter(10.0, 20.0), 4, 1}};
    CHECK(match_predictions(past, gt).tp == 0);
}

TEST_CASE("empty inputs") {
    const std::vector<PredictedPoint> none;
    const std::vector<BoxAnnotation> gts{{0, 0, 5, 5}, {10, 10, 5, 5}};
    const auto r = match_predictions(none, gts);
    CHECK(r.tp == 0);
    CHECK(r.fn == 2);
    const std::vector<PredictedPoint> preds{{1, 1, 0.3}};
    CHECK(match_predictions(preds, std::vector<BoxAnnotation>{}).fp == 1);
}

TEST_CASE("optimal matching beats nearest-first") {
    // Boxes 6x8 (diagonal 10) centered at (100,100), (115,100), (200,100).
    const std::vector<BoxAnnotation> gts{{97, 96, 6, 8}, {112, 96, 6, 8}, {197, 96, 6, 8}};
    const std::vector<PredictedPoint> preds{{105, 100, 1}, {92, 100, 1}, {201, 100, 1}};
    const auto r = match_predictions(preds, gts);
    CHECK(r.tp == 3);
    CHECK(r.total_distance() == doctest::Approx(19.0).epsilon(1e-12));
    const auto best = brute_force(preds, gts);
    CHECK(best.tp == 3);
    CHECK(best.distance == doctest::Approx(19.0).epsilon(1e-12));
    for (const auto& pair : r.pairs) {
        if (pair.pred == 0) CHECK(pair.gt == 1);
        if (pair.pred == 1) CHECK(pair.gt == 0);
    }
}

TEST_CASE("matching agrees with brute force on small instances") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 500; ++trial) {
        const auto [preds, gts] = random_instance(rng, 6);
        const auto r = match_predictions(preds, gts);
        const auto best = brute_force(preds, gts);
        check_invariants(r, preds, gts);
        REQUIRE(r.tp == best.tp);
        CHECK(r.total_distance() == doctest::Approx(best.distance).epsilon(1e-9));
    }
}

TEST_CASE("assignment solver") {
    Eigen::MatrixXd cost(2, 3);
    cost << 4, 1, 3, 2, 0, 5;
    const auto cols = solve_assignment(cost);
    REQUIRE(cols.size() == 2);
    CHECK(cols[0] == 1);
    CHECK(cols[1] == 0);
}

TEST_CASE("translation and scaling leave matches unchanged") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        auto [preds, gts] = random_instance(rng, 12);
        const auto base = match_predictions(preds, gts);
        auto tp = preds;
        auto tg = gts;
        for (auto& p : tp) p.x += 37, p.y -= 11;
        for (auto& g : tg) g.x += 37, g.y -= 11;
        const auto moved = match_predictions(tp, tg);
        CHECK(moved.tp == base.tp);
        CHECK(moved.total_distance() == doctest::Approx(base.total_distance()).epsilon(1e-9));
        for (double k : {4.0, 0.25}) {
            auto sp = preds;
            auto sg = gts;
            for (auto& p : sp) p.x *= k, p.y *= k;
            for (auto& g : sg) g.x *= k, g.y *= k, g.w *= k, g.h *= k;
            const auto scaled = match_predictions(sp, sg);
            CHECK(scaled.tp == base.tp);
            CHECK(scaled.fp == base.fp);
            CHECK(scaled.fn == base.fn);
        }
    }
}

TEST_CASE("localization metrics on a fixture") {
    std::vector<MatchResult> results(3);
    results[0].tp = 3, results[0].fp = 1, results[0].fn = 0;
    results[1].tp = 0, results[1].fp = 0, results[1].fn = 2;
    const std::vector<CountPair> counts{{4, 3}, {0, 2}, {0, 0}};
    const auto m = localization_metrics(results, counts);
    CHECK(m.images == 3);
    CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-12));
    CHECK(m.macro_precision == doctest::Approx(1.75 / 3).epsilon(1e-12));
    CHECK(m.macro_recall == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx((6.0 / 7 + 1) / 3).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.mse == doctest::Approx(std::sqrt(5.0 / 3)).epsilon(1e-12));
    REQUIRE(m.nae.has_value());
    CHECK(*m.nae == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("count errors") {
    const std::vector<MatchResult> results(2);
    const std::vector<CountPair> counts{{13, 10}, {6, 10}};
    const auto m = localization_metrics(results, counts);
    CHECK(m.mae == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(m.mse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));

    const std::vector<CountPair> no_gt{{1, 0}, {0, 0}};
    CHECK_FALSE(localization_metrics(results, no_gt).nae.has_value());
    CHECK_THROWS_AS(localization_metrics(results, std::vector<CountPair>(1)), ContractError);
}

TEST_CASE("perfect predictions") {
    const std::vector<BoxAnnotation> gts{{0, 0, 10, 10}, {50, 50, 10, 12}};
    const std::vector<PredictedPoint> preds{{5, 5, 1}, {55, 56, 1}};
    const std::vector<MatchResult> results{match_predictions(preds, gts)};
    const std::vector<CountPair> counts{{2, 2}};
    const auto m = localization_metrics(results, counts);
    CHECK(m.f1 == 1.0);
    CHECK(m.mae == 0.0);
    CHECK(m.mse == 0.0);
    CHECK(*m.nae == 0.0);
}

TEST_CASE("f1 does not drop when a false positive becomes a true positive") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> d(0, 20);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<MatchResult> results(1);
        results[0].tp = d(rng);
        results[0].fp = d(rng) + 1;
        results[0].fn = d(rng) + 1;
        const std::vector<CountPair> counts{{results[0].tp + results[0].fp, results[0].tp + results[0].fn}};
        const double before = localization_metrics(results, counts).f1;
        ++results[0].tp;
        --results[0].fp;
        --results[0].fn;
        CHECK(localization_metrics(results, counts).f1 >= before);
    }
}

TEST_CASE("confidence from map") {
    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(40, 60, 0.7);
    const std::vector<BoxAnnotation> boxes{{0, 0, 60, 40}, {3.5, 2.25, 10, 7}, {59, 39, 1, 1}};
    for (double c : confidence_from_map(constant, boxes)) CHECK(c == doctest::Approx(0.7).epsilon(1e-12));

    Eigen::MatrixXd indicator = Eigen::MatrixXd::Zero(40, 60);
    indicator.block(10, 20, 5, 8).setOnes();
    const std::vector<BoxAnnotation> inside{{20, 10, 8, 5}};
    CHECK(confidence_from_map(indicator, inside)[0] == 1.0);

    const std::vector<BoxAnnotation> outside{{55, 0, 10, 10}};
    CHECK_THROWS_AS(confidence_from_map(constant, outside), ContractError);
}

TEST_CASE("confidence from map matches a pixel loop") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> level(0, 256);
    std::uniform_real_distribution<double> unit(0, 1);
    Eigen::MatrixXd dyadic(48, 64), general(48, 64);
    for (Eigen::Index r = 0; r < 48; ++r) {
        for (Eigen::Index c = 0; c < 64; ++c) {
            dyadic(r, c) = level(rng) / 256.0;
            general(r, c) = unit(rng);
        }
    }
    std::uniform_real_distribution<double> px(0, 40);
    std::uniform_real_distribution<double> sz(0.5, 8);
    for (int trial = 0; trial < 300; ++trial) {
        const BoxAnnotation box{px(rng), px(rng), sz(rng), sz(rng)};
        const std::vector<BoxAnnotation> boxes{box};
        const auto c0 = static_cast<Eigen::Index>(std::floor(box.x));
        const auto r0 = static_cast<Eigen::Index>(std::floor(box.y));
        const auto c1 = static_cast<Eigen::Index>(std::ceil(box.x + box.w));
        const auto r1 = static_cast<Eigen::Index>(std::ceil(box.y + box.h));
        double sum_d = 0, sum_g = 0;
        for (Eigen::Index r = r0; r < r1; ++r) {
            for (Eigen::Index c = c0; c < c1; ++c) {
                sum_d += dyadic(r, c);
                sum_g += general(r, c);
            }
        }
        const double cells = static_cast<double>((r1 - r0) * (c1 - c0));
        // Multiples of 1/256 sum without rounding, so the two orders agree bit for bit.
        CHECK(confidence_from_map(dyadic, boxes)[0] == sum_d / cells);
        CHECK(confidence_from_map(general, boxes)[0] == doctest::Approx(sum_g / cells).epsilon(1e-12));
    }
}

TEST_CASE("ece examples") {
    std::vector<ConfidenceRecord> calibrated;
    for (int i = 0; i < 100; ++i) calibrated.push_back({0.75, i % 4 != 0});
    const auto c = ece(calibrated);
    CHECK(c.ece == doctest::Approx(0).epsilon(1e-15));
    CHECK(c.bins[7].count == 100);

    const std::vector<ConfidenceRecord> four{{0.95, true}, {0.95, true}, {0.95, false}, {0.95, false}};
    const auto r = ece(four);
    CHECK(std::abs(r.ece - 0.45) < 1e-15);
    CHECK(r.bins[9].count == 4);
    CHECK(r.bins[9].precision == 0.5);

    const std::vector<ConfidenceRecord> edges{{0.0, false}, {1.0, true}, {0.1, true}};
    const auto e = ece(edges);
    CHECK(e.bins[0].count == 1);
    CHECK(e.bins[9].count == 1);
    CHECK(e.bins[1].count == 1);

    CHECK_THROWS_AS(ece(std::vector<ConfidenceRecord>{}), ContractError);
    CHECK_THROWS_AS(ece(std::vector<ConfidenceRecord>{{1.2, true}}), ContractError);
}

TEST_CASE("ece bounds and calibrated insertion") {
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> conf(0, 0.5);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ConfidenceRecord> records(1 + rng() % 50);
        for (auto& r : records) r = {conf(rng), coin(rng)};
        const auto before = ece(records);
        std::size_t total = 0;
        for (const auto& b : before.bins) total += b.count;
        CHECK(total == records.size());
        CHECK(before.ece >= 0);
        CHECK(before.ece <= 1);
        for (int i = 0; i < 8; ++i) records.push_back({0.875, i != 0});
        CHECK(ece(records).ece <= before.ece + 1e-15);
    }
}
