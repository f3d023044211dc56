#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace idl {

enum class Err {
  NonConvergence,
  NegativeEntry,
  IllPosed,
  NotTriangular,
  DiagonalNotWellPosed,
  VersionMismatch,
  MalformedFile,
  NonFiniteEntry,
  DimMismatch,
  NonzeroFeedthrough,
  ShapeChain,
  NotAPartition,
  NonPositiveVariance,
  NotSimplex,
  LPInfeasible,
  NegativeState,
  NotHomogeneous,
  BlockwiseActivation,
  ParseError,
  MissingLabel,
  Unsupported,
  InvalidArgument,
};

const char* to_string(Err e);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg);
  Err code() const noexcept { return code_; }

  /// Last iterate of a fixed-point loop that failed to converge; empty otherwise.
  const std::vector<double>& iterate() const noexcept { return iterate_; }
  Error& with_iterate(std::vector<double> it) {
    iterate_ = std::move(it);
    return *this;
  }

 private:
  Err code_;
  std::vector<double> iterate_;
};

[[noreturn]] void fail(Err code, const std::string& msg);

}  // namespace idl
