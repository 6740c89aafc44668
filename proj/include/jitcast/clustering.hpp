#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jitcast/readings.hpp"
#include "jitcast/tensor.hpp"

namespace jitcast::cluster {

inline constexpr std::size_t kProfileDims = 20;

/// [mean daily kWh, 7 day-of-week ratios, 12 calendar-month ratios]. Each
/// shape block is divided by its own mean, so it averages to 1 (months that
/// never occur are set to 1).
struct ProfileVector {
    std::string customer_id;
    std::array<double, kProfileDims> features{};
};

struct ProfileBuild {
    std::vector<ProfileVector> profiles;
    std::vector<std::string> skipped;  // series shorter than the minimum
};

ProfileBuild build_profile_vectors(std::span<const data::DailySeries> series,
                                   std::size_t min_days = 60);

/// n x 20 matrix of raw profile features.
Tensor profile_matrix(std::span<const ProfileVector> profiles);

/// Centers every column, then scales each block (level, weekly, monthly) so its
/// mean squared row norm is 1. The three blocks get equal total weight.
Tensor standardize_blocks(const Tensor& raw);

struct KMeansOptions {
    std::size_t k = 4;
    std::size_t max_iter = 300;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::size_t n_init = 10;
    /// After Lloyd converges, try single-point transfers between clusters and
    /// resume Lloyd if any point moved.
    bool transfer_refine = true;
};

struct ClusterModel {
    std::size_t k = 0;
    Tensor centroids;  // k x d
    std::vector<int> labels;
    double inertia = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_init = 0;
    std::size_t iterations = 0;
    /// Inertia after every update step of the winning restart.
    std::vector<double> inertia_trace;
};

/// Nearest-centroid assignment by squared Euclidean distance, ties to the lower index.
void assign_serial(const Tensor& points, const Tensor& centroids, std::span<int> labels);
void assign_parallel(const Tensor& points, const Tensor& centroids, std::span<int> labels);

/// Lloyd's iteration, best of n_init restarts. Each restart seeds with greedy
/// farthest-point selection from a random first point, except when there are
/// no more than n_init distinct k-point seed sets: then every set is tried once.
/// Throws std::invalid_argument when k == 0 or k > n.
ClusterModel kmeans(const Tensor& points, const KMeansOptions& options);

double inertia(const Tensor& points, const Tensor& centroids, std::span<const int> labels);

struct ElbowCurve {
    std::vector<std::pair<std::size_t, double>> points;  // (k, inertia), k = 1..k_max
    std::size_t selected_k = 0;
};

/// Point of maximum perpendicular distance to the chord joining the first and
/// last curve points; ties go to the smallest k. Needs at least 3 points.
std::size_t elbow_select(std::span<const std::pair<std::size_t, double>> curve);

ElbowCurve elbow_curve(const Tensor& points, std::size_t k_max, KMeansOptions options);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace jitcast::cluster
