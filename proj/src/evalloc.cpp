#include "scaleforge/evalloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scaleforge/error.hpp"

namespace scaleforge {
namespace {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

double MatchResult::total_distance() const noexcept {
    double sum = 0;
    for (const auto& p : pairs) sum += p.distance;
    return sum;
}

std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    const Eigen::Index m = cost.cols();
    if (n > m) throw ContractError("solve_assignment: rows must not exceed cols");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; column 0 is the virtual source.
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
    std::vector<Eigen::Index> owner(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
    for (Eigen::Index i = 1; i <= n; ++i) {
        owner[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<bool> used(static_cast<std::size_t>(m + 1), false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const Eigen::Index i0 = owner[static_cast<std::size_t>(j0)];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= m; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
                if (cur < minv[js]) {
                    minv[js] = cur;
                    way[js] = j0;
                }
                if (minv[js] < delta) {
                    delta = minv[js];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= m; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) {
                    u[static_cast<std::size_t>(owner[js])] += delta;
                    v[js] -= delta;
                } else {
                    minv[js] -= delta;
                }
            }
            j0 = j1;
        } while (owner[static_cast<std::size_t>(j0)] != 0);
        do {
            const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
            owner[static_cast<std::size_t>(j0)] = owner[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 1; j <= m; ++j) {
        if (owner[static_cast<std::size_t>(j)] != 0) {
            assignment[static_cast<std::size_t>(owner[static_cast<std::size_t>(j)] - 1)] = j - 1;
        }
    }
    return assignment;
}

MatchResult match_predictions(std::span<const PredictedPoint> preds, std::span<const BoxAnnotation> gts) {
    const std::size_t n = preds.size();
    const std::size_t m = gts.size();
    MatchResult result;

    struct Edge {
        std::size_t pred, gt;
        double distance;
    };
    std::vector<Edge> edges;
    DisjointSets sets(n + m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = std::hypot(preds[i].x - gts[j].center_x(), preds[i].y - gts[j].center_y());
            if (d <= diagonal_of(gts[j])) {
                edges.push_back({i, j, d});
                sets.unite(i, n + j);
            }
        }
    }

    // Components of the feasibility graph are solved independently.
    std::vector<std::vector<std::size_t>> comp_preds(n + m), comp_gts(n + m);
    std::vector<std::vector<Edge>> comp_edges(n + m);
    for (const auto& e : edges) comp_edges[sets.find(e.pred)].push_back(e);
    for (std::size_t i = 0; i < n; ++i) comp_preds[sets.find(i)].push_back(i);
    for (std::size_t j = 0; j < m; ++j) comp_gts[sets.find(n + j)].push_back(j);

    for (std::size_t c = 0; c < n + m; ++c) {
        const auto& ce = comp_edges[c];
        if (ce.empty()) continue;
        const auto& ps = comp_preds[c];
        const auto& gs = comp_gts[c];
        const bool preds_are_rows = ps.size() <= gs.size();
        const auto rows = static_cast<Eigen::Index>(preds_are_rows ? ps.size() : gs.size());
        const auto cols = static_cast<Eigen::Index>(preds_are_rows ? gs.size() : ps.size());
        double feasible_sum = 0;
        for (const auto& e : ce) feasible_sum += e.distance;
        // Larger than any feasible total: every infeasible pair costs more than all
        // feasible distances combined, so cardinality is maximized first.
        const double blocked = 2.0 * feasible_sum + 1.0;
        Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(rows, cols, blocked);
        Eigen::MatrixXi feasible = Eigen::MatrixXi::Zero(rows, cols);
        auto local = [](const std::vector<std::size_t>& v, std::size_t x) {
            return static_cast<Eigen::Index>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
        };
        for (const auto& e : ce) {
            const Eigen::Index pi = local(ps, e.pred);
            const Eigen::Index gi = local(gs, e.gt);
            const Eigen::Index r = preds_are_rows ? pi : gi;
            const Eigen::Index col = preds_are_rows ? gi : pi;
            cost(r, col) = e.distance;
            feasible(r, col) = 1;
        }
        const auto assignment = solve_assignment(cost);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index col = assignment[static_cast<std::size_t>(r)];
            if (col < 0 || !feasible(r, col)) continue;
            const std::size_t pred = preds_are_rows ? ps[static_cast<std::size_t>(r)] : ps[static_cast<std::size_t>(col)];
            const std::size_t gt = preds_are_rows ? gs[static_cast<std::size_t>(col)] : gs[static_cast<std::size_t>(r)];
            result.pairs.push_back({pred, gt, cost(r, col)});
        }
    }
    std::sort(result.pairs.begin(), result.pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) { return a.pred < b.pred; });
    result.tp = result.pairs.size();
    result.fp = n - result.tp;
    result.fn = m - result.tp;
    return result;
}

double safe_precision(std::size_t tp, std::size_t fp, std::size_t fn) noexcept {
    if (tp + fp == 0) return fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double safe_recall(std::size_t tp, std::size_t fp, std::size_t fn) noexcept {
    if (tp + fn == 0) return fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1_score(double precision, double recall) noexcept {
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

LocMetrics localization_metrics(std::span<const MatchResult> results, std::span<const CountPair> counts) {
    if (results.size() != counts.size()) throw ContractError("localization_metrics: lists must align per image");
    LocMetrics out;
    out.images = results.size();
    if (results.empty()) return out;
    std::size_t tp = 0, fp = 0, fn = 0;
    double abs_err = 0, sq_err = 0, rel_err = 0;
    std::size_t with_gt = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
        const double p = safe_precision(r.tp, r.fp, r.fn);
        const double rc = safe_recall(r.tp, r.fp, r.fn);
        out.macro_precision += p;
        out.macro_recall += rc;
        out.macro_f1 += f1_score(p, rc);

        const double err = static_cast<double>(counts[i].n_pred) - static_cast<double>(counts[i].n_gt);
        abs_err += std::abs(err);
        sq_err += err * err;
        if (counts[i].n_gt > 0) {
            rel_err += std::abs(err) / static_cast<double>(counts[i].n_gt);
            ++with_gt;
        }
    }
    const auto n = static_cast<double>(results.size());
    out.precision = safe_precision(tp, fp, fn);
    out.recall = safe_recall(tp, fp, fn);
    out.f1 = f1_score(out.precision, out.recall);
    out.macro_precision /= n;
    out.macro_recall /= n;
    out.macro_f1 /= n;
    out.mae = abs_err / n;
    out.mse = std::sqrt(sq_err / n);
    if (with_gt > 0) out.nae = rel_err / static_cast<double>(with_gt);
    return out;
}

std::vector<double> confidence_from_map(const Eigen::MatrixXd& map, std::span<const BoxAnnotation> boxes) {
    const Eigen::Index rows = map.rows();
    const Eigen::Index cols = map.cols();
    Eigen::MatrixXd integral = Eigen::MatrixXd::Zero(rows + 1, cols + 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            integral(r + 1, c + 1) = map(r, c) + integral(r, c + 1) + integral(r + 1, c) - integral(r, c);
        }
    }
    std::vector<double> out;
    out.reserve(boxes.size());
    for (const auto& b : boxes) {
        const auto c0 = static_cast<Eigen::Index>(std::floor(b.x));
        const auto r0 = static_cast<Eigen::Index>(std::floor(b.y));
        const auto c1 = static_cast<Eigen::Index>(std::ceil(b.x + b.w));
        const auto r1 = static_cast<Eigen::Index>(std::ceil(b.y + b.h));
        if (!(b.w > 0 && b.h > 0) || c0 < 0 || r0 < 0 || c1 > cols || r1 > rows) {
            throw ContractError("confidence_from_map: box outside the confidence map");
        }
        const double sum = integral(r1, c1) - integral(r0, c1) - integral(r1, c0) + integral(r0, c0);
        out.push_back(sum / static_cast<double>((r1 - r0) * (c1 - c0)));
    }
    return out;
}

CalibrationReport ece(std::span<const ConfidenceRecord> records) {
    if (records.empty()) throw ContractError("ece: no records");
    CalibrationReport report;
    report.n = records.size();
    std::array<double, 10> conf_sum{}, matched{};
    for (const auto& r : records) {
        if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) throw ContractError("ece: confidence outside [0,1]");
        const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(r.confidence * 10.0));
        ++report.bins[bin].count;
        conf_sum[bin] += r.confidence;
        if (r.matched) matched[bin] += 1.0;
    }
    for (std::size_t i = 0; i < report.bins.size(); ++i) {
        auto& bin = report.bins[i];
        if (bin.count == 0) continue;
        const auto count = static_cast<double>(bin.count);
        bin.mean_confidence = conf_sum[i] / count;
        bin.precision = matched[i] / count;
        report.ece += count / static_cast<double>(report.n) * std::abs(bin.mean_confidence - bin.precision);
    }
    return report;
}

}  // namespace scaleforge
