#include "scaleforge/shift.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "scaleforge/error.hpp"

namespace scaleforge {
namespace {

void require_same_grid(const EmpiricalDistribution& p1, const EmpiricalDistribution& p2) {
    if (p1.edges.size() != p2.edges.size() || p1.edges != p2.edges) {
        throw ContractError("shift: distributions must share identical edges");
    }
}

void require_samples(const LabeledScaleSamples& s) {
    if (s.scales.empty()) throw ContractError("shift: empty sample set");
    if (s.scales.size() != s.labels.size()) throw ContractError("shift: one label per scale sample");
    for (int y : s.labels) {
        if (y < 0 || y >= s.label_count) throw ContractError("shift: label outside the label set");
    }
}

// Per-bin label counts; row = bin, column = label.
Eigen::MatrixXd joint_counts(const LabeledScaleSamples& s, const Eigen::VectorXd& edges, int labels) {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(edges.size() - 1, labels);
    for (std::size_t i = 0; i < s.scales.size(); ++i) counts(bin_index(edges, s.scales[i]), s.labels[i]) += 1.0;
    return counts;
}

}  // namespace

double diversity_shift(const EmpiricalDistribution& p1, const EmpiricalDistribution& p2) {
    require_same_grid(p1, p2);
    const double overlap = p1.mass.cwiseMin(p2.mass).sum();
    // Disjoint supports sit exactly on the upper bound.
    if (overlap == 0.0 && !p1.empty() && !p2.empty()) return 1.0;
    return std::clamp(0.5 * (p1.mass - p2.mass).cwiseAbs().sum(), 0.0, 1.0);
}

double diversity_shift_on_disjoint_support(const EmpiricalDistribution& p1, const EmpiricalDistribution& p2) {
    require_same_grid(p1, p2);
    if (p1.mass.cwiseMin(p2.mass).sum() == 0.0 && !p1.empty() && !p2.empty()) return 1.0;
    double sum = 0;
    for (Eigen::Index i = 0; i < p1.bins(); ++i) {
        if (p1.mass[i] * p2.mass[i] == 0.0) sum += std::abs(p1.mass[i] - p2.mass[i]);
    }
    return std::clamp(0.5 * sum, 0.0, 1.0);
}

CorrelationShiftEstimate correlation_shift(const LabeledScaleSamples& s1, const LabeledScaleSamples& s2,
                                           const Eigen::VectorXd& edges) {
    require_samples(s1);
    require_samples(s2);
    if (edges.size() < 2) throw ContractError("correlation_shift: need at least two edges");
    const int labels = std::max(s1.label_count, s2.label_count);
    const Eigen::MatrixXd c1 = joint_counts(s1, edges, labels);
    const Eigen::MatrixXd c2 = joint_counts(s2, edges, labels);
    const Eigen::VectorXd m1 = c1.rowwise().sum();
    const Eigen::VectorXd m2 = c2.rowwise().sum();
    const auto n1 = static_cast<double>(s1.scales.size());
    const auto n2 = static_cast<double>(s2.scales.size());

    CorrelationShiftEstimate out;
    double sum = 0;
    for (Eigen::Index b = 0; b < c1.rows(); ++b) {
        if (m1[b] == 0 || m2[b] == 0) {
            if (m1[b] != m2[b]) ++out.undefined_bins;
            continue;
        }
        const double weight = std::sqrt((m1[b] / n1) * (m2[b] / n2));
        const double disagreement = (c1.row(b) / m1[b] - c2.row(b) / m2[b]).cwiseAbs().sum();
        sum += weight * disagreement;
    }
    out.value = std::clamp(0.5 * sum, 0.0, 1.0);
    return out;
}

ShiftReport shift_report(const LabeledScaleSamples& s1, const LabeledScaleSamples& s2, Eigen::Index bins,
                         double kl_smoothing) {
    require_samples(s1);
    require_samples(s2);
    const Eigen::VectorXd edges = shared_edges(s1.scales, s2.scales, bins);
    const auto p1 = histogram(s1.scales, edges);
    const auto p2 = histogram(s2.scales, edges);
    const auto cor = correlation_shift(s1, s2, edges);
    ShiftReport report;
    report.div_div = diversity_shift(p1, p2);
    report.div_div_disjoint = diversity_shift_on_disjoint_support(p1, p2);
    report.div_cor = cor.value;
    report.undefined_bins = cor.undefined_bins;
    report.kl = kl_divergence(p1, p2, kl_smoothing);
    report.bins = bins;
    report.n1 = s1.scales.size();
    report.n2 = s2.scales.size();
    return report;
}

BootstrapErrors bootstrap_errors(const LabeledScaleSamples& s1, const LabeledScaleSamples& s2, Eigen::Index bins,
                                 int resamples, std::uint64_t seed) {
    require_samples(s1);
    require_samples(s2);
    if (resamples < 2) throw ContractError("bootstrap: need at least two resamples");
    const Eigen::VectorXd edges = shared_edges(s1.scales, s2.scales, bins);
    std::mt19937_64 rng(seed);
    auto resample = [&](const LabeledScaleSamples& s) {
        std::uniform_int_distribution<std::size_t> pick(0, s.scales.size() - 1);
        LabeledScaleSamples out;
        out.label_count = s.label_count;
        out.scales.resize(s.scales.size());
        out.labels.resize(s.labels.size());
        for (std::size_t i = 0; i < s.scales.size(); ++i) {
            const std::size_t j = pick(rng);
            out.scales[i] = s.scales[j];
            out.labels[i] = s.labels[j];
        }
        return out;
    };
    Eigen::ArrayXd div(resamples), cor(resamples);
    for (int r = 0; r < resamples; ++r) {
        const auto a = resample(s1);
        const auto b = resample(s2);
        div[r] = diversity_shift(histogram(a.scales, edges), histogram(b.scales, edges));
        cor[r] = correlation_shift(a, b, edges).value;
    }
    auto sd = [&](const Eigen::ArrayXd& v) {
        return std::sqrt((v - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
    };
    return {sd(div), sd(cor)};
}

std::vector<double> quantile_thresholds(std::span<const double> pooled, int classes) {
    if (classes < 1) throw ContractError("quantile classes must be >= 1");
    if (classes == 1) return {};
    return equal_mass_boundaries(pooled, classes);
}

int quantile_class(const std::vector<double>& thresholds, double value) noexcept {
    return static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), value) - thresholds.begin());
}

std::vector<LabeledScaleSamples> domain_samples(const BenchmarkManifest& manifest, std::span<const Patch> patches,
                                                ScaleSource source) {
    std::unordered_map<std::string, const Patch*> by_id;
    for (const auto& p : patches) by_id.emplace(p.id(), &p);
    auto lookup = [&](const std::string& id) -> const Patch& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ContractError("manifest references unknown patch " + id);
        return *it->second;
    };

    std::vector<double> pooled_counts;
    for (const auto& d : manifest.domains) {
        for (const auto& id : d.patch_ids) pooled_counts.push_back(static_cast<double>(lookup(id).objects.size()));
    }
    constexpr int kClasses = 4;
    const auto thresholds = pooled_counts.size() >= kClasses ? quantile_thresholds(pooled_counts, kClasses)
                                                             : std::vector<double>{};

    std::vector<LabeledScaleSamples> out;
    for (const auto& d : manifest.domains) {
        LabeledScaleSamples s;
        s.label_count = kClasses;
        for (const auto& id : d.patch_ids) {
            const Patch& p = lookup(id);
            const int label = quantile_class(thresholds, static_cast<double>(p.objects.size()));
            if (source == ScaleSource::PatchMean) {
                s.scales.push_back(p.mean_scale);
                s.labels.push_back(label);
            } else {
                for (const auto& b : p.objects) {
                    s.scales.push_back(scale_of(b));
                    s.labels.push_back(label);
                }
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ShiftReport> shift_matrix(const BenchmarkManifest& manifest, std::span<const Patch> patches,
                                      Eigen::Index bins, ScaleSource source) {
    const auto samples = domain_samples(manifest, patches, source);
    std::vector<ShiftReport> out;
    for (const auto& a : samples) {
        for (const auto& b : samples) {
            auto report = shift_report(a, b, bins);
            report.label_proxy = kCountQuartileProxy;
            out.push_back(std::move(report));
        }
    }
    return out;
}

}  // namespace scaleforge
