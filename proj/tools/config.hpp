#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idl/tensor.hpp"

namespace idltool {

/// Flat key=value files; '#' starts a comment, blank lines are skipped.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

// Plain numeric table io: header row plus comma-separated reals.
idl::Matrix read_columns_csv(const std::string& path, std::vector<std::string>* header = nullptr);
void write_columns_csv(const std::string& path, const idl::Matrix& columns,
                       const std::vector<std::string>& header);

}  // namespace idltool
