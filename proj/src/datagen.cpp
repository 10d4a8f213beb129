#include "pshield/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

#include "pshield/rng.hpp"

namespace pshield {

namespace {

std::vector<double> unit_vector(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  while (true) {
    double norm2 = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      norm2 += x * x;
    }
    if (norm2 > 1e-12) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

// Cluster centers on the sphere of the given radius. Layout per dimension is
// chosen to keep the minimum pairwise separation high, so the acceptance
// datasets stay cleanly separable at small spreads.
std::vector<std::vector<double>> blob_centers(std::size_t k, std::size_t dim,
                                              double radius, Rng& rng) {
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  if (dim == 2) {
    const double offset = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < k; ++c) {
      const double ang =
          offset + 2.0 * std::numbers::pi * static_cast<double>(c) /
                       static_cast<double>(k);
      centers.push_back({radius * std::cos(ang), radius * std::sin(ang)});
    }
    return centers;
  }
  if (k <= dim) {
    // Gram-Schmidt on seeded Gaussian draws -> orthonormal directions.
    std::vector<std::vector<double>> basis;
    while (basis.size() < k) {
      auto v = unit_vector(dim, rng);
      for (const auto& u : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += v[i] * u[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
      }
      double norm2 = 0.0;
      for (double x : v) norm2 += x * x;
      if (norm2 < 1e-6) continue;  // colinear draw, retry
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
      basis.push_back(std::move(v));
    }
    for (auto& u : basis) {
      for (double& x : u) x *= radius;
      centers.push_back(std::move(u));
    }
    return centers;
  }
  // k > dim >= 3: greedy max-min selection from a seeded candidate pool.
  std::vector<std::vector<double>> pool;
  const std::size_t pool_size = 64 * k;
  pool.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(unit_vector(dim, rng));
  std::vector<double> min_dist2(pool_size, std::numeric_limits<double>::max());
  std::size_t pick = 0;
  for (std::size_t c = 0; c < k; ++c) {
    centers.push_back(pool[pick]);
    for (std::size_t i = 0; i < pool_size; ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = pool[i][j] - pool[pick][j];
        d2 += d * d;
      }
      min_dist2[i] = std::min(min_dist2[i], d2);
    }
    pick = static_cast<std::size_t>(
        std::max_element(min_dist2.begin(), min_dist2.end()) - min_dist2.begin());
  }
  for (auto& c_vec : centers) {
    for (double& x : c_vec) x *= radius;
  }
  return centers;
}

// Stratified 80/20 split: per class, the last lround(0.2*n) points go to the
// test side.
TrainTestSplit split_by_class(
    const std::vector<std::vector<std::vector<double>>>& per_class_points,
    std::size_t dim) {
  const std::size_t k = per_class_points.size();
  TrainTestSplit out;
  out.train.features = FeatureMatrix(dim);
  out.test.features = FeatureMatrix(dim);
  out.train.num_classes = out.test.num_classes = k;
  out.train.split = SplitTag::Train;
  out.test.split = SplitTag::Test;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& pts = per_class_points[c];
    const std::size_t n_test = static_cast<std::size_t>(
        std::lround(0.2 * static_cast<double>(pts.size())));
    const std::size_t n_train = pts.size() - n_test;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto& side = i < n_train ? out.train : out.test;
      side.features.push_row(pts[i]);
      side.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

}  // namespace

TrainTestSplit make_blobs(std::size_t classes, std::size_t per_class,
                          std::size_t dim, double spread, std::uint64_t seed) {
  if (classes < 2) throw ParamError("make_blobs: need K >= 2");
  if (per_class < 1) throw ParamError("make_blobs: need per_class >= 1");
  if (dim < 2) throw ParamError("make_blobs: need dim >= 2");
  if (!(spread > 0.0)) throw ParamError("make_blobs: need spread > 0");

  Rng rng(seed);
  const auto centers = blob_centers(classes, dim, 4.0 * spread, rng);
  std::vector<std::vector<std::vector<double>>> pts(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    pts[c].reserve(per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> p(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        p[j] = centers[c][j] + spread * rng.gaussian();
      }
      pts[c].push_back(std::move(p));
    }
  }
  return split_by_class(pts, dim);
}

TrainTestSplit make_rings(std::size_t classes, std::size_t per_class,
                          std::uint64_t seed) {
  if (classes < 2) throw ParamError("make_rings: need K >= 2");
  if (per_class < 1) throw ParamError("make_rings: need per_class >= 1");

  constexpr double kRadialSigma = 0.1;
  Rng rng(seed);
  std::vector<std::vector<std::vector<double>>> pts(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    pts[c].reserve(per_class);
    const double base_r = static_cast<double>(c + 1);
    for (std::size_t i = 0; i < per_class; ++i) {
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = base_r + kRadialSigma * rng.gaussian();
      pts[c].push_back({r * std::cos(ang), r * std::sin(ang)});
    }
  }
  return split_by_class(pts, 2);
}

QueryPool make_query_pool(const DatasetSpec& spec,
                          const LabeledDataset& victim_train, std::size_t n,
                          PoolMode mode, std::uint64_t seed) {
  if (n < 1) throw ParamError("make_query_pool: need n >= 1");
  if (victim_train.size() == 0) {
    throw ParamError("make_query_pool: empty victim dataset");
  }
  const std::size_t dim = victim_train.dim();
  QueryPool pool;
  pool.mode = mode;
  pool.features = FeatureMatrix(dim);
  Rng rng(seed);

  if (mode == PoolMode::OutOfDistribution) {
    std::vector<double> lo(dim, std::numeric_limits<double>::max());
    std::vector<double> hi(dim, std::numeric_limits<double>::lowest());
    for (std::size_t i = 0; i < victim_train.size(); ++i) {
      const auto row = victim_train.features.row(i);
      for (std::size_t j = 0; j < dim; ++j) {
        lo[j] = std::min(lo[j], row[j]);
        hi[j] = std::max(hi[j], row[j]);
      }
    }
    std::vector<double> p(dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double mid = 0.5 * (lo[j] + hi[j]);
        const double half = 0.75 * (hi[j] - lo[j]);  // 1.5x the original width
        p[j] = rng.uniform(mid - half, mid + half);
      }
      pool.features.push_row(p);
    }
    return pool;
  }

  // in_distribution: fresh draws from the generative parameters; never a
  // reused victim row because this stream never touches victim points.
  if (spec.generator == "blobs") {
    Rng center_rng(spec.seed);
    const auto centers =
        blob_centers(spec.classes, spec.dim, 4.0 * spec.spread, center_rng);
    std::vector<double> p(spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.index(spec.classes);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        p[j] = centers[c][j] + spec.spread * rng.gaussian();
      }
      pool.features.push_row(p);
    }
    return pool;
  }
  if (spec.generator == "rings") {
    constexpr double kRadialSigma = 0.1;
    std::vector<double> p(2);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.index(spec.classes);
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = static_cast<double>(c + 1) + kRadialSigma * rng.gaussian();
      p[0] = r * std::cos(ang);
      p[1] = r * std::sin(ang);
      pool.features.push_row(p);
    }
    return pool;
  }
  throw ParamError("make_query_pool: in_distribution pool needs a generative "
                   "dataset (got '" + spec.generator + "')");
}

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError(path + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.size() < 2 || header.back() != "label") {
    throw SchemaError(path + ": line 1: header must be f0,...,f{D-1},label");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[i] != "f" + std::to_string(i)) {
      throw SchemaError(path + ": line 1: expected column f" +
                        std::to_string(i) + ", got '" + header[i] + "'");
    }
  }

  LabeledDataset data;
  data.features = FeatureMatrix(dim);
  std::map<std::string, int> label_ids;  // value -> dense id
  std::vector<double> row(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != dim + 1) {
      throw SchemaError(path + ": line " + std::to_string(line_no) +
                        ": expected " + std::to_string(dim + 1) +
                        " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[j].size() || fields[j].empty()) {
        throw ParseError(path + ": line " + std::to_string(line_no) +
                         ": bad numeric value '" + fields[j] + "'");
      }
      row[j] = v;
    }
    const std::string& label_tok = fields[dim];
    auto it = label_ids.find(label_tok);
    if (it == label_ids.end()) {
      it = label_ids.emplace(label_tok, static_cast<int>(label_ids.size())).first;
    }
    data.features.push_row(row);
    data.labels.push_back(it->second);
  }
  data.num_classes = label_ids.size();
  return data;
}

TrainTestSplit make_dataset(const DatasetSpec& spec) {
  if (spec.generator == "blobs") {
    return make_blobs(spec.classes, spec.per_class, spec.dim, spec.spread,
                      spec.seed);
  }
  if (spec.generator == "rings") {
    return make_rings(spec.classes, spec.per_class, spec.seed);
  }
  if (spec.generator == "csv") {
    TrainTestSplit out;
    out.train = load_csv(spec.csv_train);
    out.train.split = SplitTag::Train;
    out.test = load_csv(spec.csv_test);
    out.test.split = SplitTag::Test;
    // label ids must agree across the two files
    if (out.train.dim() != out.test.dim()) {
      throw SchemaError("csv dataset: train dim " +
                        std::to_string(out.train.dim()) + " != test dim " +
                        std::to_string(out.test.dim()));
    }
    out.train.num_classes = out.test.num_classes =
        std::max(out.train.num_classes, out.test.num_classes);
    return out;
  }
  throw ConfigError("dataset.generator: unknown generator '" + spec.generator +
                    "'");
}

}  // namespace pshield
