#pragma once

#include <cstdint>
#include <string>

#include "config.hpp"

namespace idltool {

struct CommonFlags {
  std::string model;
  std::string data;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  double kappa = 0.5;
  double tol = 1e-8;
  double budget_fraction = 0.2;
  std::size_t card_k = 0;
  std::size_t rank = 0;
};

int cmd_synth(const std::string& kind, std::size_t m, const CommonFlags& flags);
int cmd_convert(const std::string& nnspec_path, const CommonFlags& flags);
int cmd_predict(const CommonFlags& flags);
int cmd_train(const CommonFlags& flags, const std::string& eval_path);
int cmd_analyze(const CommonFlags& flags);
int cmd_attack(const CommonFlags& flags);
int cmd_compress(const CommonFlags& flags);
int cmd_rescale(const CommonFlags& flags);

}  // namespace idltool
