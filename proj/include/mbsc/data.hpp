#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbsc/linalg.hpp"

namespace mbsc {

/// n samples of dimension d (one sample per row) plus optional ground truth.
struct Dataset {
  std::string name;
  MatrixXd points;                      // n x d
  std::optional<std::vector<int>> labels;
  std::optional<double> sigma_hint;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

/// Parses the LibSVM sparse text format. Labels are read as reals and mapped to
/// contiguous ids in order of first appearance.
Dataset parse_libsvm(std::istream& in, std::string name = "libsvm");
Dataset parse_libsvm_string(std::string_view text, std::string name = "libsvm");
Dataset load_libsvm_file(const std::string& path);

/// Writes values with 17 significant digits so that parse_libsvm reads them back
/// bit-exactly. Zero features are omitted.
void write_libsvm(std::ostream& out, const Dataset& ds);
std::string serialize_libsvm(const Dataset& ds);

Dataset gen_blobs(int k, int per_cluster, int d, double spread, std::uint64_t seed);
Dataset gen_circles(int n, const std::vector<double>& radii, double noise, std::uint64_t seed);

/// Median pairwise Euclidean distance over a seeded subsample of
/// min(sample, n) points.
double median_sigma(const Dataset& ds, Index sample, std::uint64_t seed);

struct RegistryEntry {
  std::string name;
  Index samples;
  Index features;
  int classes;
  double sigma;
};

/// Metadata for the benchmark datasets. Files are never fetched; callers pass
/// the path to a local copy.
const std::vector<RegistryEntry>& dataset_registry();
std::optional<RegistryEntry> find_registry_entry(std::string_view name);

}  // namespace mbsc
