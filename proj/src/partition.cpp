#include "scaleforge/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <numeric>
#include <random>

#include "scaleforge/error.hpp"
#include "scaleforge/rng.hpp"

namespace scaleforge {
namespace {

constexpr std::uint64_t kSplitStream = 0x5EED0000ULL;

struct Assignment {
    std::vector<std::size_t> grid_index;
    std::size_t total = 0;
    std::size_t spread = 0;
};

}  // namespace

std::vector<double> equal_mass_boundaries(const EmpiricalDistribution& dist, int regions) {
    if (dist.empty()) throw ContractError("equal_mass_boundaries: empty distribution");
    if (regions < 2) throw ContractError("equal_mass_boundaries: need at least two regions");
    if (static_cast<std::size_t>(regions) > dist.n_samples) {
        throw ContractError("equal_mass_boundaries: more regions than samples");
    }
    const double total = dist.mass.sum();
    std::vector<double> out;
    double cumulative = 0;
    Eigen::Index bin = 0;
    for (int m = 1; m < regions; ++m) {
        const double q = total * m / regions;
        while (bin < dist.bins() - 1 && cumulative + dist.mass[bin] < q) cumulative += dist.mass[bin++];
        const double lo = dist.edges[bin];
        const double hi = dist.edges[bin + 1];
        const double mass = dist.mass[bin];
        const double frac = mass > 0 ? std::clamp((q - cumulative) / mass, 0.0, 1.0) : 0.0;
        out.push_back(lo + frac * (hi - lo));
    }
    return out;
}

std::vector<double> equal_mass_boundaries(std::span<const double> samples, int regions) {
    if (samples.empty()) throw ContractError("equal_mass_boundaries: no samples");
    if (regions < 2) throw ContractError("equal_mass_boundaries: need at least two regions");
    if (static_cast<std::size_t>(regions) > samples.size()) {
        throw ContractError("equal_mass_boundaries: more regions than samples");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    const double last = static_cast<double>(sorted.size() - 1);
    for (int m = 1; m < regions; ++m) {
        const double h = last * m / regions;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        out.push_back(sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
    }
    return out;
}

double reshape_kernel(double value, double center, double sigma) noexcept {
    if (std::isinf(sigma)) return 1.0;
    const double z = (value - center) / sigma;
    return std::exp(-0.5 * z * z);
}

std::vector<double> acceptance_draws(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = u(rng);
    return out;
}

std::vector<std::size_t> reshape_indices(std::span<const double> mean_scales, double center, double sigma,
                                         std::uint64_t seed) {
    if (!(sigma > 0)) throw ContractError("reshape: sigma must be > 0");
    const auto draws = acceptance_draws(mean_scales.size(), seed);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mean_scales.size(); ++i) {
        if (draws[i] < reshape_kernel(mean_scales[i], center, sigma)) out.push_back(i);
    }
    return out;
}

std::vector<Patch> reshape_domain(std::span<const Patch> members, double center, double sigma,
                                  std::uint64_t seed) {
    std::vector<double> means;
    means.reserve(members.size());
    for (const auto& p : members) means.push_back(p.mean_scale);
    std::vector<Patch> out;
    for (std::size_t i : reshape_indices(means, center, sigma, seed)) out.push_back(members[i]);
    return out;
}

std::vector<double> sigma_grid(const Interval& interval, int points) {
    if (points < 1) throw ContractError("sigma grid needs at least one point");
    const double w = interval.width();
    if (!(w > 0)) return std::vector<double>(static_cast<std::size_t>(points), std::numeric_limits<double>::infinity());
    std::vector<double> out;
    const double lo = std::log(w / 20.0);
    const double hi = std::log(w * 5.0);
    for (int g = 0; g < points; ++g) {
        const double t = points == 1 ? 1.0 : static_cast<double>(g) / (points - 1);
        out.push_back(std::exp(lo + t * (hi - lo)));
    }
    return out;
}

SigmaSearch search_sigmas(const std::vector<std::vector<double>>& member_scales,
                          std::span<const Interval> intervals, double epsilon, std::uint64_t seed,
                          int grid_points) {
    const std::size_t m_count = member_scales.size();
    if (m_count < 2) throw ContractError("search_sigmas: need at least two domains");
    if (intervals.size() != m_count) throw ContractError("search_sigmas: one interval per domain");
    if (!(epsilon >= 0)) throw ContractError("search_sigmas: epsilon must be >= 0");

    // retained[m][g]: accepted members of domain m at grid point g. The same draws are
    // reused across the grid, so retention is non-decreasing in g.
    std::vector<std::vector<double>> grids(m_count);
    std::vector<std::vector<std::size_t>> retained(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        grids[m] = sigma_grid(intervals[m], grid_points);
        const auto draws = acceptance_draws(member_scales[m].size(), derive_seed(seed, m));
        const double center = intervals[m].center();
        for (double sigma : grids[m]) {
            std::size_t kept = 0;
            for (std::size_t i = 0; i < draws.size(); ++i) {
                if (draws[i] < reshape_kernel(member_scales[m][i], center, sigma)) ++kept;
            }
            retained[m].push_back(kept);
        }
    }

    std::vector<std::size_t> floors;
    for (const auto& r : retained) floors.insert(floors.end(), r.begin(), r.end());
    std::sort(floors.begin(), floors.end());
    floors.erase(std::unique(floors.begin(), floors.end()), floors.end());

    auto value = [&](const Assignment& a, std::size_t m) { return retained[m][a.grid_index[m]]; };
    auto evaluate = [&](Assignment& a) {
        std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
        a.total = 0;
        for (std::size_t m = 0; m < m_count; ++m) {
            lo = std::min(lo, value(a, m));
            hi = std::max(hi, value(a, m));
            a.total += value(a, m);
        }
        a.spread = hi - lo;
    };
    auto balanced = [&](const Assignment& a) {
        return static_cast<double>(a.spread) <= epsilon * static_cast<double>(a.total);
    };
    auto imbalance = [](const Assignment& a) {
        return a.total == 0 ? 0.0 : static_cast<double>(a.spread) / static_cast<double>(a.total);
    };

    const auto top = static_cast<std::size_t>(grid_points - 1);
    std::optional<Assignment> best_feasible;
    Assignment least_imbalanced{std::vector<std::size_t>(m_count, top)};
    evaluate(least_imbalanced);

    // For every admissible floor, start from the widest kernels and shrink the largest
    // domain until the balance constraint holds or the floor would be violated.
    for (std::size_t floor : floors) {
        Assignment a{std::vector<std::size_t>(m_count, top)};
        bool possible = true;
        for (std::size_t m = 0; m < m_count; ++m) possible = possible && retained[m][top] >= floor;
        if (!possible) continue;
        evaluate(a);
        while (!balanced(a)) {
            std::size_t big = 0;
            for (std::size_t m = 1; m < m_count; ++m) {
                if (value(a, m) > value(a, big)) big = m;
            }
            const std::size_t current = value(a, big);
            std::size_t g = a.grid_index[big];
            while (g > 0 && retained[big][g] == current) --g;
            if (retained[big][g] == current || retained[big][g] < floor) {
                possible = false;
                break;
            }
            a.grid_index[big] = g;
            evaluate(a);
        }
        if (imbalance(a) < imbalance(least_imbalanced)) least_imbalanced = a;
        if (possible && (!best_feasible || a.total > best_feasible->total)) best_feasible = a;
    }

    SigmaSearch out;
    const Assignment& chosen = best_feasible ? *best_feasible : least_imbalanced;
    out.feasible = best_feasible.has_value();
    for (std::size_t m = 0; m < m_count; ++m) {
        out.sigmas.push_back(grids[m][chosen.grid_index[m]]);
        out.retained.push_back(value(chosen, m));
    }
    out.imbalance = imbalance(chosen);
    return out;
}

void validate(const PartitionConfig& cfg) {
    if (!(cfg.epsilon >= 0)) throw ContractError("PartitionConfig: epsilon must be >= 0");
    if (!(cfg.val_fraction >= 0 && cfg.val_fraction < 1)) {
        throw ContractError("PartitionConfig: val_fraction must be in [0,1)");
    }
    if (cfg.sigma_grid_points < 1) throw ContractError("PartitionConfig: sigma_grid_points must be >= 1");
    if (cfg.pdf_bins < 1) throw ContractError("PartitionConfig: pdf_bins must be >= 1");
}

std::vector<std::string> domain_names(int domains) {
    if (domains == 4) return {"Tiny", "Small", "Normal", "Big"};
    if (domains == 2) return {"Tiny", "Big"};
    std::vector<std::string> out;
    for (int m = 1; m <= domains; ++m) out.push_back("D" + std::to_string(m));
    return out;
}

BenchmarkManifest build_benchmark(std::span<const Patch> patches, int domains, const PartitionConfig& cfg,
                                  std::uint64_t seed) {
    validate(cfg);
    if (domains < 1) throw ContractError("build_benchmark: need at least one domain");
    if (patches.empty()) throw ContractError("build_benchmark: no patches");

    BenchmarkManifest manifest;
    manifest.domain_count = domains;
    manifest.seed = seed;
    manifest.config = cfg;

    std::vector<double> scales;
    for (const auto& p : patches) scales.push_back(p.mean_scale);
    // One extra top region is carved out and set aside.
    manifest.boundaries = equal_mass_boundaries(scales, domains + 1);
    const double min_scale = *std::min_element(scales.begin(), scales.end());

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(domains));
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto region = static_cast<std::size_t>(
            std::upper_bound(manifest.boundaries.begin(), manifest.boundaries.end(), scales[i]) -
            manifest.boundaries.begin());
        if (region == static_cast<std::size_t>(domains)) {
            manifest.dropped_region.push_back(patches[i].id());
        } else {
            members[region].push_back(i);
        }
    }

    std::vector<Interval> intervals;
    std::vector<std::vector<double>> member_scales;
    for (int m = 0; m < domains; ++m) {
        const double lo = m == 0 ? min_scale : manifest.boundaries[static_cast<std::size_t>(m - 1)];
        intervals.push_back({lo, manifest.boundaries[static_cast<std::size_t>(m)]});
        std::vector<double> s;
        for (std::size_t i : members[static_cast<std::size_t>(m)]) s.push_back(scales[i]);
        member_scales.push_back(std::move(s));
    }

    std::vector<double> sigmas(static_cast<std::size_t>(domains), std::numeric_limits<double>::infinity());
    if (domains > 1) {
        const auto search = search_sigmas(member_scales, intervals, cfg.epsilon, seed, cfg.sigma_grid_points);
        sigmas = search.sigmas;
        manifest.sigma_feasible = search.feasible;
        manifest.imbalance = search.imbalance;
    }

    const auto names = domain_names(domains);
    for (int m = 0; m < domains; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        DomainSpec spec;
        spec.name = names[mi];
        spec.interval = intervals[mi];
        spec.sigma = sigmas[mi];
        spec.members_before = members[mi].size();
        const auto kept = reshape_indices(member_scales[mi], intervals[mi].center(), sigmas[mi], derive_seed(seed, mi));
        if (kept.empty()) throw BuildError("domain " + spec.name + " is empty after reshaping");
        std::vector<double> kept_scales;
        for (std::size_t k : kept) {
            const std::size_t i = members[mi][k];
            spec.patch_ids.push_back(patches[i].id());
            kept_scales.push_back(scales[i]);
        }
        spec.mean_scale = std::accumulate(kept_scales.begin(), kept_scales.end(), 0.0) /
                          static_cast<double>(kept_scales.size());
        spec.reshaped_pdf = histogram(kept_scales, linear_edges(intervals[mi].lo, intervals[mi].hi, cfg.pdf_bins));

        std::vector<std::string> order = spec.patch_ids;
        std::mt19937_64 rng(derive_seed(seed, kSplitStream + mi));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
        std::size_t n_val = 0;
        if (order.size() >= 2 && cfg.val_fraction > 0) {
            n_val = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(order.size()))), 1,
                order.size() - 1);
        }
        Split split;
        split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
        std::sort(split.val.begin(), split.val.end());
        std::sort(split.train.begin(), split.train.end());
        manifest.splits.push_back(std::move(split));
        manifest.domains.push_back(std::move(spec));
    }
    if (domains > 1) {
        std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0, total = 0;
        for (const auto& d : manifest.domains) {
            lo = std::min(lo, d.patch_ids.size());
            hi = std::max(hi, d.patch_ids.size());
            total += d.patch_ids.size();
        }
        manifest.imbalance = static_cast<double>(hi - lo) / static_cast<double>(total);
    }
    return manifest;
}

std::vector<Trial> leave_one_out_trials(const BenchmarkManifest& manifest) {
    std::vector<Trial> trials;
    for (std::size_t t = 0; t < manifest.domains.size(); ++t) {
        Trial trial;
        trial.target = manifest.domains[t].name;
        for (std::size_t s = 0; s < manifest.domains.size(); ++s) {
            if (s == t) continue;
            trial.sources.push_back(manifest.domains[s].name);
            const auto& split = manifest.splits[s];
            trial.train.insert(trial.train.end(), split.train.begin(), split.train.end());
            trial.val.insert(trial.val.end(), split.val.begin(), split.val.end());
        }
        trial.test = manifest.domains[t].patch_ids;
        trials.push_back(std::move(trial));
    }
    return trials;
}

}  // namespace scaleforge
