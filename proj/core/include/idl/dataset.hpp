#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "idl/tensor.hpp"

namespace idl {

enum class DatasetKind { Regression, Classification };

struct Dataset {
  Matrix u;  // p x m, one column per sample
  Matrix y;  // q x m; classification columns are one-hot
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;  // class labels or response column names
  DatasetKind kind = DatasetKind::Regression;
};

struct LoadSchema {
  std::vector<std::string> label_columns;  // classification uses exactly one
  DatasetKind kind = DatasetKind::Regression;
  char delimiter = ',';
};

/// Delimiter-separated file with a mandatory header row. Features are
/// parsed as reals in header order; classification labels are one-hot
/// encoded against the sorted set of distinct values.
Dataset load_dataset(std::istream& is, const LoadSchema& schema);
Dataset load_dataset_file(const std::string& path, const LoadSchema& schema);

void save_dataset(std::ostream& os, const Dataset& ds, char delimiter = ',');
void save_dataset_file(const std::string& path, const Dataset& ds, char delimiter = ',');

/// Seeded synthetic tasks: a one-dimensional noisy regression of a damped
/// cosine, or a five-input two-class problem labeled by a random implicit
/// generator. Byte-identical across runs for a fixed seed.
Dataset generate_synthetic(DatasetKind kind, std::size_t m, std::uint64_t seed);

/// The regression target without noise.
double synthetic_regression_target(double u);

}  // namespace idl
