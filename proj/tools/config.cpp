#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "idl/errors.hpp"

namespace idltool {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) idl::fail(idl::Err::ParseError, "cannot open config " + path);
  Config cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      idl::fail(idl::Err::ParseError, "config line " + std::to_string(lineno) + " has no '='");
    cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_real(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0.0;
  auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (res.ec != std::errc{}) idl::fail(idl::Err::ParseError, "config value for " + key);
  return v;
}

std::size_t Config::get_count(const std::string& key, std::size_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t v = 0;
  auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (res.ec != std::errc{}) idl::fail(idl::Err::ParseError, "config value for " + key);
  return v;
}

bool Config::get_flag(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  idl::fail(idl::Err::ParseError, "config flag " + key + " must be boolean");
}

idl::Matrix read_columns_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream f(path);
  if (!f) idl::fail(idl::Err::ParseError, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) idl::fail(idl::Err::ParseError, "empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(trim(cell));
  }
  if (header) *header = names;

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        idl::fail(idl::Err::ParseError,
                  "cell '" + cell + "' at line " + std::to_string(lineno) + " of " + path);
      row.push_back(v);
    }
    if (row.size() != names.size())
      idl::fail(idl::Err::ParseError, "line " + std::to_string(lineno) + " width mismatch");
    rows.push_back(std::move(row));
  }
  idl::Matrix columns(names.size(), rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < names.size(); ++i) columns(i, j) = rows[j][i];
  return columns;
}

void write_columns_csv(const std::string& path, const idl::Matrix& columns,
                       const std::vector<std::string>& header) {
  std::ofstream f(path);
  if (!f) idl::fail(idl::Err::ParseError, "cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << '\n';
  char buf[32];
  for (std::size_t j = 0; j < columns.cols(); ++j) {
    for (std::size_t i = 0; i < columns.rows(); ++i) {
      auto res = std::to_chars(buf, buf + sizeof(buf), columns(i, j));
      f << (i ? "," : "") << std::string_view(buf, res.ptr - buf);
    }
    f << '\n';
  }
}

}  // namespace idltool
