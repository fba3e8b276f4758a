#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "scaleforge/regularize.hpp"
#include "scaleforge/stats.hpp"

namespace scaleforge {

struct Interval {
    double lo = 0;
    double hi = 0;

    double center() const noexcept { return 0.5 * (lo + hi); }
    double width() const noexcept { return hi - lo; }
};

/// M-1 quantile boundaries of a histogram, interpolating linearly inside bins.
std::vector<double> equal_mass_boundaries(const EmpiricalDistribution& dist, int regions);

/// M-1 sample quantiles (linear interpolation between order statistics).
std::vector<double> equal_mass_boundaries(std::span<const double> samples, int regions);

/// Peak-normalized Gaussian acceptance kernel; sigma = +inf accepts everything.
double reshape_kernel(double value, double center, double sigma) noexcept;

/// One uniform [0,1) draw per member, in member order.
std::vector<double> acceptance_draws(std::size_t n, std::uint64_t seed);

/// Indices of the members kept by Gaussian rejection sampling around `center`.
std::vector<std::size_t> reshape_indices(std::span<const double> mean_scales, double center, double sigma,
                                         std::uint64_t seed);

std::vector<Patch> reshape_domain(std::span<const Patch> members, double center, double sigma,
                                  std::uint64_t seed);

/// 32 log-spaced values over [width/20, width*5]; +inf for a degenerate interval.
std::vector<double> sigma_grid(const Interval& interval, int points = 32);

struct SigmaSearch {
    std::vector<double> sigmas;
    std::vector<std::size_t> retained;
    /// (max - min) / total over the retained counts.
    double imbalance = 0;
    bool feasible = true;
};

/// Picks one sigma per domain maximizing total retention under
/// max - min <= epsilon * total. Domain m draws from derive_seed(seed, m).
SigmaSearch search_sigmas(const std::vector<std::vector<double>>& member_scales,
                          std::span<const Interval> intervals, double epsilon, std::uint64_t seed,
                          int grid_points = 32);

struct DomainSpec {
    std::string name;
    Interval interval;
    std::vector<std::string> patch_ids;
    EmpiricalDistribution reshaped_pdf;
    double sigma = std::numeric_limits<double>::infinity();
    std::size_t members_before = 0;
    double mean_scale = 0;
};

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> val;
};

struct PartitionConfig {
    double epsilon = 0.02;
    double val_fraction = 0.05;
    int sigma_grid_points = 32;
    Eigen::Index pdf_bins = 64;
};

void validate(const PartitionConfig& cfg);

struct BenchmarkManifest {
    int domain_count = 0;
    std::vector<double> boundaries;
    std::vector<DomainSpec> domains;
    std::vector<Split> splits;
    std::vector<std::string> dropped_region;
    std::uint64_t seed = 0;
    bool sigma_feasible = true;
    double imbalance = 0;
    PartitionConfig config;
};

/// Tiny/Small/Normal/Big for four domains, Tiny/Big for two, D1..DM otherwise.
std::vector<std::string> domain_names(int domains);

BenchmarkManifest build_benchmark(std::span<const Patch> patches, int domains, const PartitionConfig& cfg,
                                  std::uint64_t seed);

struct Trial {
    std::string target;
    std::vector<std::string> sources;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

std::vector<Trial> leave_one_out_trials(const BenchmarkManifest& manifest);

}  // namespace scaleforge
