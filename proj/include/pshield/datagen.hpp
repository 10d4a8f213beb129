#pragma once

#include <cstdint>
#include <string>

#include "pshield/dataset.hpp"

namespace pshield {

// Generator parameters, kept together so query pools can draw fresh points
// from the same distribution and so config echoes are complete.
struct DatasetSpec {
  std::string generator = "blobs";  // blobs | rings | csv
  std::size_t classes = 5;
  std::size_t per_class = 200;
  std::size_t dim = 2;
  double spread = 0.1;
  std::uint64_t seed = 42;
  std::string csv_train;  // csv generator only
  std::string csv_test;
};

// K Gaussian clusters with seeded centers on a sphere of radius 4*spread,
// per-coordinate noise sigma = spread, stratified 80/20 train/test split.
// For dim == 2 the centers sit at equal angles with a seeded rotation; for
// dim >= 3 they are seeded orthonormal directions when K <= dim and a greedy
// max-min selection from a seeded candidate pool otherwise.
TrainTestSplit make_blobs(std::size_t classes, std::size_t per_class,
                          std::size_t dim, double spread, std::uint64_t seed);

// Concentric annuli in the plane: class c sits at radius c+1 with Gaussian
// radial noise sigma = 0.1. Same split rule as make_blobs.
TrainTestSplit make_rings(std::size_t classes, std::size_t per_class,
                          std::uint64_t seed);

// Attacker query pool. in_distribution draws fresh points from the victim's
// generative parameters (never reusing victim rows; the pool has its own
// seed). ood draws uniformly over the victim data's bounding box inflated by
// 50% per dimension around its center. Points come out pre-shuffled by
// construction so budget slicing is nested.
QueryPool make_query_pool(const DatasetSpec& spec,
                          const LabeledDataset& victim_train, std::size_t n,
                          PoolMode mode, std::uint64_t seed);

// Parses `f0,...,f{D-1},label` CSV. Labels may be arbitrary tokens; they are
// remapped to dense 0..K-1 in first-appearance order.
LabeledDataset load_csv(const std::string& path);

// Dispatch over DatasetSpec::generator; csv loads csv_train/csv_test.
TrainTestSplit make_dataset(const DatasetSpec& spec);

}  // namespace pshield
