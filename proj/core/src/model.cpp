#include "idl/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace idl {

ImplicitModel::ImplicitModel(Matrix a, Matrix b, Matrix c, Matrix d, BlockStructure structure)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)),
      structure_(std::move(structure)) {
  const std::size_t n = a_.rows(), p = b_.cols(), q = c_.rows();
  if (a_.cols() != n) fail(Err::DimMismatch, "A must be square");
  if (b_.rows() != n) fail(Err::DimMismatch, "B row count");
  if (c_.cols() != n) fail(Err::DimMismatch, "C column count");
  if (d_.rows() != q || d_.cols() != p) fail(Err::DimMismatch, "D shape");
  if (structure_.dim() != n) fail(Err::DimMismatch, "block structure does not cover the state");
}

Prediction predict(const ImplicitModel& m, const Vector& u, const SolveOptions& opts) {
  if (u.size() != m.input_dim()) fail(Err::DimMismatch, "predict input");
  require_finite(u, "input");
  Vector b = matvec(m.b(), u);
  EquilibriumResult eq = picard_solve(m.a(), b, m.structure(), opts);
  Vector y = matvec(m.c(), eq.x);
  Vector du = matvec(m.d(), u);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += du[i];
  return {std::move(y), std::move(eq.x)};
}

Matrix predict_batch(const ImplicitModel& m, const Matrix& u, const SolveOptions& opts) {
  if (u.rows() != m.input_dim()) fail(Err::DimMismatch, "predict_batch input");
  const std::size_t n = m.state_dim(), cols = u.cols();
  Matrix bu = matmul(m.b(), u);
  // Columns are independent fixed points; solving them separately keeps the
  // result identical to per-column predict calls.
  Matrix x(n, cols);
  Vector b(n);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < n; ++i) b[i] = bu(i, j);
    EquilibriumResult eq = picard_solve(m.a(), b, m.structure(), opts);
    for (std::size_t i = 0; i < n; ++i) x(i, j) = eq.x[i];
  }
  Matrix y = matmul(m.c(), x);
  Matrix du = matmul(m.d(), u);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += du.data()[i];
  return y;
}

ImplicitModel lift_output_activation(const ImplicitModel& m, const ActivationKind& out_act) {
  const std::size_t n = m.state_dim(), p = m.input_dim(), q = m.output_dim();
  Matrix a2(q + n, q + n);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < n; ++j) a2(i, q + j) = m.c()(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a2(q + i, q + j) = m.a()(i, j);
  Matrix b2(q + n, p);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < p; ++j) b2(i, j) = m.d()(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) b2(q + i, j) = m.b()(i, j);
  Matrix c2(q, q + n);
  for (std::size_t i = 0; i < q; ++i) c2(i, i) = 1.0;
  Matrix d2(q, p);
  BlockStructure s2 = concat(BlockStructure::single(q, out_act), m.structure());
  return ImplicitModel(std::move(a2), std::move(b2), std::move(c2), std::move(d2), std::move(s2));
}

ImplicitModel lift_affine(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d,
                          const Vector& state_bias, const Vector& out_bias,
                          const BlockStructure& structure) {
  const std::size_t n = a.rows(), p = b.cols(), q = c.rows();
  if (state_bias.size() != n || out_bias.size() != q) fail(Err::DimMismatch, "lift_affine biases");
  Matrix b2(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) b2(i, j) = b(i, j);
    b2(i, p) = state_bias[i];
  }
  Matrix d2(q, p + 1);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < p; ++j) d2(i, j) = d(i, j);
    d2(i, p) = out_bias[i];
  }
  return ImplicitModel(a, std::move(b2), c, std::move(d2), structure);
}

ImplicitModel shift_activation(const ImplicitModel& m) {
  if (!m.structure().all_componentwise())
    fail(Err::BlockwiseActivation, "shift_activation needs a componentwise structure");
  const std::size_t n = m.state_dim();

  Vector at0(n, 0.0);
  std::vector<Block> blocks;
  for (const Block& b : m.structure().blocks()) {
    ActivationKind k = b.act;
    if (!k.zero_at_zero()) k.zero_shifted = true;
    blocks.push_back(Block{b.size, k});
  }
  BlockStructure shifted(std::move(blocks));
  for (std::size_t l = 0; l < m.structure().blocks().size(); ++l) {
    const Block& b = m.structure().blocks()[l];
    const double v = b.act.componentwise() ? scalar_activation(b.act, 0.0) : 0.0;
    for (std::size_t i = 0; i < b.size; ++i) at0[m.structure().block_offset(l) + i] = v;
  }

  // state bias A*phi(0), output bias C*phi(0), both fed by the appended 1
  return lift_affine(m.a(), m.b(), m.c(), m.d(), matvec(m.a(), at0), matvec(m.c(), at0), shifted);
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_matrix(std::ostream& os, const char* name, const Matrix& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

std::string activation_token(const ActivationKind& a) {
  std::string t = a.name();
  if (a.kind == Act::LeakyRelu) t += ' ' + format_double(a.slope);
  if (a.kind == Act::MaxPoolGroups)
    for (auto g : a.groups) t += ' ' + std::to_string(g);
  if (a.zero_shifted && !(a.kind == Act::Relu || a.kind == Act::LeakyRelu ||
                          a.kind == Act::Tanh || a.kind == Act::Identity))
    t += " zeroed";
  return t;
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::string next() {
    std::string line;
    while (std::getline(is_, line)) {
      ++lineno_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return line;
    }
    fail(Err::MalformedFile, "unexpected end of file at line " + std::to_string(lineno_));
  }

  std::size_t lineno() const { return lineno_; }

 private:
  std::istream& is_;
  std::size_t lineno_ = 0;
};

double parse_double_token(const std::string& tok, std::size_t lineno) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    fail(Err::MalformedFile, "bad number '" + tok + "' at line " + std::to_string(lineno));
  if (!std::isfinite(v))
    fail(Err::NonFiniteEntry, "non-finite entry at line " + std::to_string(lineno));
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

Matrix read_matrix(LineReader& in, const char* name, std::size_t rows, std::size_t cols) {
  auto header = split_ws(in.next());
  if (header.size() != 3 || header[0] != name)
    fail(Err::MalformedFile, std::string("expected matrix header ") + name);
  if (header[1] != std::to_string(rows) || header[2] != std::to_string(cols))
    fail(Err::MalformedFile, std::string(name) + " dimensions disagree with the dims line");
  std::vector<double> data;
  data.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    auto toks = split_ws(in.next());
    if (toks.size() != cols)
      fail(Err::MalformedFile, std::string(name) + " row " + std::to_string(i) +
                                   " has " + std::to_string(toks.size()) + " entries");
    for (const auto& t : toks) data.push_back(parse_double_token(t, in.lineno()));
  }
  return Matrix(rows, cols, std::move(data));
}

ActivationKind parse_activation(const std::vector<std::string>& toks, std::size_t from,
                                std::size_t lineno) {
  if (from >= toks.size()) fail(Err::MalformedFile, "missing activation at line " + std::to_string(lineno));
  const std::string& name = toks[from];
  bool zeroed = !toks.empty() && toks.back() == "zeroed";
  ActivationKind a;
  if (name == "relu") a = ActivationKind::relu();
  else if (name == "leakyrelu") {
    if (from + 1 >= toks.size()) fail(Err::MalformedFile, "leakyrelu needs a slope");
    a = ActivationKind::leaky_relu(parse_double_token(toks[from + 1], lineno));
  } else if (name == "tanh") a = ActivationKind::tanh();
  else if (name == "sigmoid") a = ActivationKind::sigmoid();
  else if (name == "softmax") a = ActivationKind::softmax();
  else if (name == "identity") a = ActivationKind::identity();
  else if (name == "maxpool") {
    std::vector<std::size_t> groups;
    for (std::size_t i = from + 1; i < toks.size(); ++i)
      groups.push_back(static_cast<std::size_t>(parse_double_token(toks[i], lineno)));
    a = ActivationKind::maxpool(std::move(groups));
  } else {
    fail(Err::MalformedFile, "unknown activation '" + name + "' at line " + std::to_string(lineno));
  }
  if (zeroed) a.zero_shifted = true;
  return a;
}

}  // namespace

void save_model(std::ostream& os, const ImplicitModel& m) {
  os << "IMPLICITNET v1\n";
  os << "dims " << m.state_dim() << ' ' << m.input_dim() << ' ' << m.output_dim() << '\n';
  os << "blocks " << m.structure().blocks().size() << '\n';
  for (const Block& b : m.structure().blocks())
    os << b.size << ' ' << activation_token(b.act) << '\n';
  write_matrix(os, "A", m.a());
  write_matrix(os, "B", m.b());
  write_matrix(os, "C", m.c());
  write_matrix(os, "D", m.d());
}

void save_model_file(const std::string& path, const ImplicitModel& m) {
  std::ofstream f(path);
  if (!f) fail(Err::MalformedFile, "cannot open " + path + " for writing");
  save_model(f, m);
}

ImplicitModel load_model(std::istream& is) {
  LineReader in(is);
  {
    auto header = split_ws(in.next());
    if (header.empty() || header[0] != "IMPLICITNET") fail(Err::MalformedFile, "missing IMPLICITNET header");
    if (header.size() != 2 || header[1] != "v1")
      fail(Err::VersionMismatch, "unsupported model file version");
  }
  auto dims = split_ws(in.next());
  if (dims.size() != 4 || dims[0] != "dims") fail(Err::MalformedFile, "expected dims line");
  const auto n = static_cast<std::size_t>(parse_double_token(dims[1], in.lineno()));
  const auto p = static_cast<std::size_t>(parse_double_token(dims[2], in.lineno()));
  const auto q = static_cast<std::size_t>(parse_double_token(dims[3], in.lineno()));

  auto bl = split_ws(in.next());
  if (bl.size() != 2 || bl[0] != "blocks") fail(Err::MalformedFile, "expected blocks line");
  const auto nblocks = static_cast<std::size_t>(parse_double_token(bl[1], in.lineno()));
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < nblocks; ++i) {
    auto toks = split_ws(in.next());
    if (toks.size() < 2) fail(Err::MalformedFile, "block line too short");
    auto size = static_cast<std::size_t>(parse_double_token(toks[0], in.lineno()));
    blocks.push_back(Block{size, parse_activation(toks, 1, in.lineno())});
  }

  Matrix a = read_matrix(in, "A", n, n);
  Matrix b = read_matrix(in, "B", n, p);
  Matrix c = read_matrix(in, "C", q, n);
  Matrix d = read_matrix(in, "D", q, p);
  return ImplicitModel(std::move(a), std::move(b), std::move(c), std::move(d),
                       BlockStructure(std::move(blocks)));
}

ImplicitModel load_model_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Err::MalformedFile, "cannot open " + path);
  return load_model(f);
}

}  // namespace idl
