#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "csagc/dataset.hpp"

// Test-data builders: an NSL-KDD-format file writer with exact per-class row
// counts and class-dependent feature distributions (so models can actually
// learn from it), plus a synthetic Gaussian classification task.
namespace fixture {

// Published per-class record counts for the two NSL-KDD splits
// (Normal, DoS, Probe, R2L, U2R).
inline constexpr std::array<long, 5> kTrainCounts = {67343, 45927, 11656, 995, 52};
inline constexpr std::array<long, 5> kTestCounts = {9711, 7458, 2421, 2754, 200};

// Writes a CSV file in NSL-KDD layout (41 features, attack name, difficulty)
// with exactly counts[c] rows of class c, shuffled. Rows draw their features
// from class-dependent distributions; the test split additionally uses a few
// attack names and service categories absent from the training split.
void write_nslkdd(const std::string& path, const std::array<long, 5>& counts,
                  std::uint64_t seed, bool train_split);

// Per-class counts scaled down to roughly `total` rows (each class keeps at
// least min_per_class rows).
std::array<long, 5> scaled_counts(const std::array<long, 5>& counts, long total,
                                  long min_per_class = 10);

// Standardized-feature classification task: class c is an isotropic Gaussian
// at distance `sep` from the origin along a class-specific direction.
csagc::dataset::FeatureMatrix gaussian_task(int n_per_class, int dim, int classes,
                                            double sep, std::uint64_t seed);

// Two-class task with a 9:1 class ratio (majority class 0).
csagc::dataset::FeatureMatrix imbalanced_task(int n_majority, int n_minority, int dim,
                                              double sep, std::uint64_t seed);

}  // namespace fixture
