#include "idl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "idl/model.hpp"
#include "idl/rng.hpp"
#include "idl/training.hpp"

namespace idl {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, std::size_t line, std::size_t col) {
  const std::string t = trim(cell);
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
    fail(Err::ParseError, "cell '" + cell + "' at line " + std::to_string(line) + ", column " +
                              std::to_string(col) + " is not a number");
  if (!std::isfinite(v))
    fail(Err::NonFiniteEntry, "non-finite cell at line " + std::to_string(line));
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset load_dataset(std::istream& is, const LoadSchema& schema) {
  if (schema.label_columns.empty()) fail(Err::MissingLabel, "schema names no label column");
  if (schema.kind == DatasetKind::Classification && schema.label_columns.size() != 1)
    fail(Err::MissingLabel, "classification uses exactly one label column");

  std::string line;
  if (!std::getline(is, line)) fail(Err::ParseError, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split(line, schema.delimiter);
  for (auto& h : header) h = trim(h);

  std::vector<std::size_t> label_idx;
  for (const std::string& name : schema.label_columns) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(Err::MissingLabel, "label column '" + name + "' not in header");
    label_idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::size_t> feature_idx;
  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (std::find(label_idx.begin(), label_idx.end(), j) == label_idx.end()) {
      feature_idx.push_back(j);
      feature_names.push_back(header[j]);
    }
  }

  std::vector<Vector> feat_rows;
  std::vector<std::string> raw_labels;        // classification
  std::vector<Vector> numeric_labels;         // regression
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line, schema.delimiter);
    if (cells.size() != header.size())
      fail(Err::ParseError, "line " + std::to_string(lineno) + " has " +
                                std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(header.size()));
    Vector feats(feature_idx.size());
    for (std::size_t j = 0; j < feature_idx.size(); ++j)
      feats[j] = parse_cell(cells[feature_idx[j]], lineno, feature_idx[j] + 1);
    feat_rows.push_back(std::move(feats));

    if (schema.kind == DatasetKind::Classification) {
      raw_labels.push_back(trim(cells[label_idx[0]]));
    } else {
      Vector labels(label_idx.size());
      for (std::size_t j = 0; j < label_idx.size(); ++j)
        labels[j] = parse_cell(cells[label_idx[j]], lineno, label_idx[j] + 1);
      numeric_labels.push_back(std::move(labels));
    }
  }
  const std::size_t m = feat_rows.size();
  if (m == 0) fail(Err::ParseError, "no data rows");

  Dataset ds;
  ds.kind = schema.kind;
  ds.feature_names = std::move(feature_names);
  ds.u = Matrix(feature_idx.size(), m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < feature_idx.size(); ++i) ds.u(i, j) = feat_rows[j][i];

  if (schema.kind == DatasetKind::Classification) {
    std::vector<std::string> classes = raw_labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;
    ds.label_names = std::move(classes);
    ds.y = Matrix(ds.label_names.size(), m);
    for (std::size_t j = 0; j < m; ++j) ds.y(index[raw_labels[j]], j) = 1.0;
  } else {
    ds.label_names = schema.label_columns;
    ds.y = Matrix(label_idx.size(), m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < label_idx.size(); ++i) ds.y(i, j) = numeric_labels[j][i];
  }
  return ds;
}

Dataset load_dataset_file(const std::string& path, const LoadSchema& schema) {
  std::ifstream f(path);
  if (!f) fail(Err::ParseError, "cannot open " + path);
  return load_dataset(f, schema);
}

void save_dataset(std::ostream& os, const Dataset& ds, char delimiter) {
  for (std::size_t i = 0; i < ds.feature_names.size(); ++i) {
    if (i) os << delimiter;
    os << ds.feature_names[i];
  }
  if (ds.kind == DatasetKind::Classification) {
    os << delimiter << "label";
  } else {
    for (const std::string& name : ds.label_names) os << delimiter << name;
  }
  os << '\n';
  for (std::size_t j = 0; j < ds.u.cols(); ++j) {
    for (std::size_t i = 0; i < ds.u.rows(); ++i) {
      if (i) os << delimiter;
      os << format_double(ds.u(i, j));
    }
    if (ds.kind == DatasetKind::Classification) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < ds.y.rows(); ++i)
        if (ds.y(i, j) > ds.y(arg, j)) arg = i;
      os << delimiter << ds.label_names[arg];
    } else {
      for (std::size_t i = 0; i < ds.y.rows(); ++i) os << delimiter << format_double(ds.y(i, j));
    }
    os << '\n';
  }
}

void save_dataset_file(const std::string& path, const Dataset& ds, char delimiter) {
  std::ofstream f(path);
  if (!f) fail(Err::ParseError, "cannot open " + path + " for writing");
  save_dataset(f, ds, delimiter);
}

double synthetic_regression_target(double u) {
  return 5.0 * std::cos(std::numbers::pi * u) * std::exp(-0.5 * std::fabs(u));
}

Dataset generate_synthetic(DatasetKind kind, std::size_t m, std::uint64_t seed) {
  if (m == 0) fail(Err::InvalidArgument, "need at least one sample");
  Dataset ds;
  ds.kind = kind;

  if (kind == DatasetKind::Regression) {
    auto rng_u = make_rng(seed, "synthetic.regression.inputs");
    auto rng_w = make_rng(seed, "synthetic.regression.noise");
    std::uniform_real_distribution<double> in_range(-5.0, 5.0);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    ds.u = Matrix(1, m);
    ds.y = Matrix(1, m);
    for (std::size_t j = 0; j < m; ++j) {
      const double u = in_range(rng_u);
      ds.u(0, j) = u;
      ds.y(0, j) = synthetic_regression_target(u) + noise(rng_w);
    }
    ds.feature_names = {"u"};
    ds.label_names = {"y"};
    return ds;
  }

  // two classes from a random implicit generator over five inputs
  constexpr std::size_t p = 5, q = 2, gen_n = 10;
  ImplicitModel generator = init_model(gen_n, p, q, ActivationKind::relu(), 0.95,
                                       seed ^ 0x9e3779b97f4a7c15ULL);
  auto rng_u = make_rng(seed, "synthetic.classification.inputs");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ds.u = Matrix(p, m);
  ds.y = Matrix(q, m);
  Vector u(p);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < p; ++i) {
      u[i] = unit(rng_u);
      ds.u(i, j) = u[i];
    }
    Vector yhat = predict(generator, u).y;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < q; ++i)
      if (yhat[i] > yhat[arg]) arg = i;
    ds.y(arg, j) = 1.0;
  }
  ds.feature_names = {"u1", "u2", "u3", "u4", "u5"};
  ds.label_names = {"c0", "c1"};
  return ds;
}

}  // namespace idl
