#include "idl/compose.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace idl {

namespace {

void place(Matrix& dst, std::size_t r0, std::size_t c0, const Matrix& src) {
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(r0 + i, c0 + j) = src(i, j);
}

}  // namespace

ImplicitModel cascade(const ImplicitModel& m1, const ImplicitModel& m2) {
  if (m1.output_dim() != m2.input_dim())
    fail(Err::DimMismatch, "cascade: output of the first stage feeds the second");
  const std::size_t n1 = m1.state_dim(), n2 = m2.state_dim();
  const std::size_t p = m1.input_dim(), q = m2.output_dim();

  Matrix a(n2 + n1, n2 + n1);
  place(a, 0, 0, m2.a());
  place(a, 0, n2, matmul(m2.b(), m1.c()));
  place(a, n2, n2, m1.a());

  Matrix b(n2 + n1, p);
  place(b, 0, 0, matmul(m2.b(), m1.d()));
  place(b, n2, 0, m1.b());

  Matrix c(q, n2 + n1);
  place(c, 0, 0, m2.c());
  place(c, 0, n2, matmul(m2.d(), m1.c()));

  Matrix d = matmul(m2.d(), m1.d());
  return ImplicitModel(std::move(a), std::move(b), std::move(c), std::move(d),
                       concat(m2.structure(), m1.structure()));
}

namespace {

ImplicitModel combine_parallel(const ImplicitModel& m1, const ImplicitModel& m2,
                               bool shared_input, double w1, double w2, bool sum_outputs) {
  if (shared_input && m1.input_dim() != m2.input_dim())
    fail(Err::DimMismatch, "parallel composition with a shared input");
  if (sum_outputs && m1.output_dim() != m2.output_dim())
    fail(Err::DimMismatch, "summed outputs need matching dimensions");

  const std::size_t n1 = m1.state_dim(), n2 = m2.state_dim();
  const std::size_t p = shared_input ? m1.input_dim() : m1.input_dim() + m2.input_dim();
  const std::size_t q = sum_outputs ? m1.output_dim() : m1.output_dim() + m2.output_dim();

  Matrix a(n1 + n2, n1 + n2);
  place(a, 0, 0, m1.a());
  place(a, n1, n1, m2.a());

  Matrix b(n1 + n2, p);
  place(b, 0, 0, m1.b());
  place(b, n1, shared_input ? 0 : m1.input_dim(), m2.b());

  Matrix c(q, n1 + n2);
  Matrix d(q, p);
  if (sum_outputs) {
    place(c, 0, 0, w1 * m1.c());
    place(c, 0, n1, w2 * m2.c());
    place(d, 0, 0, w1 * m1.d());
    Matrix d2 = w2 * m2.d();
    for (std::size_t i = 0; i < d2.rows(); ++i)
      for (std::size_t j = 0; j < d2.cols(); ++j)
        d(i, (shared_input ? 0 : m1.input_dim()) + j) += d2(i, j);
  } else {
    place(c, 0, 0, m1.c());
    place(c, m1.output_dim(), n1, m2.c());
    place(d, 0, 0, m1.d());
    place(d, m1.output_dim(), shared_input ? 0 : m1.input_dim(), m2.d());
  }
  return ImplicitModel(std::move(a), std::move(b), std::move(c), std::move(d),
                       concat(m1.structure(), m2.structure()));
}

}  // namespace

ImplicitModel parallel_sum(const ImplicitModel& m1, const ImplicitModel& m2, bool shared_input,
                           double w1, double w2) {
  return combine_parallel(m1, m2, shared_input, w1, w2, true);
}

ImplicitModel concat_outputs(const ImplicitModel& m1, const ImplicitModel& m2, bool shared_input) {
  return combine_parallel(m1, m2, shared_input, 1.0, 1.0, false);
}

FeedbackResult feedback(const ImplicitModel& m1, const ImplicitModel& m2) {
  auto is_zero = [](const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.data()[i] != 0.0) return false;
    return true;
  };
  if (!is_zero(m1.d()) || !is_zero(m2.d()))
    fail(Err::NonzeroFeedthrough, "feedback requires D1 = D2 = 0");
  if (m1.output_dim() != m2.input_dim() || m2.output_dim() != m1.input_dim())
    fail(Err::DimMismatch, "feedback loop dimensions");

  const std::size_t n1 = m1.state_dim(), n2 = m2.state_dim();
  const std::size_t p = m1.input_dim(), q = m1.output_dim();

  Matrix a(n1 + n2, n1 + n2);
  place(a, 0, 0, m1.a());
  place(a, 0, n1, matmul(m1.b(), m2.c()));
  place(a, n1, 0, matmul(m2.b(), m1.c()));
  place(a, n1, n1, m2.a());

  Matrix b(n1 + n2, p);
  place(b, 0, 0, m1.b());
  Matrix c(q, n1 + n2);
  place(c, 0, 0, m1.c());

  return FeedbackResult{
      ImplicitModel(std::move(a), std::move(b), std::move(c), Matrix(q, p),
                    concat(m1.structure(), m2.structure())),
      "feedback loops do not inherit well-posedness; run a certificate check"};
}

ImplicitModel import_feedforward(const std::vector<Matrix>& weights,
                                 const std::vector<ActivationKind>& acts) {
  if (weights.empty()) fail(Err::ShapeChain, "no weight matrices");
  if (acts.size() + 1 != weights.size())
    fail(Err::ShapeChain, "need one activation per hidden layer");
  for (std::size_t l = 0; l + 1 < weights.size(); ++l) {
    if (weights[l + 1].cols() != weights[l].rows())
      fail(Err::ShapeChain, "weight shapes do not chain at layer " + std::to_string(l));
  }

  const std::size_t depth = acts.size();  // number of hidden layers
  const std::size_t p = weights.front().cols();
  const std::size_t q = weights.back().rows();

  // state is (x_depth, ..., x_1), one block per hidden layer, newest first
  std::vector<Block> blocks;
  std::size_t n = 0;
  for (std::size_t l = depth; l-- > 0;) {
    blocks.push_back(Block{weights[l].rows(), acts[l]});
    n += weights[l].rows();
  }

  if (depth == 0) {
    // a single weight matrix is a purely affine rule
    return ImplicitModel(Matrix(0, 0), Matrix(0, p), Matrix(q, 0), weights[0], BlockStructure());
  }

  Matrix a(n, n), b(n, p), c(q, n), d(q, p);
  std::size_t row = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t l = depth - 1 - i;  // this block holds x_{l+1} = phi(W_l x_l)
    if (l == 0) {
      place(b, row, 0, weights[0]);
    } else {
      place(a, row, row + weights[l].rows(), weights[l]);
    }
    row += weights[l].rows();
  }
  place(c, 0, 0, weights.back());
  return ImplicitModel(std::move(a), std::move(b), std::move(c), std::move(d),
                       BlockStructure(std::move(blocks)));
}

Matrix conv2d_matrix(const Matrix& kernel, std::size_t in_h, std::size_t in_w, std::size_t stride) {
  const std::size_t kh = kernel.rows(), kw = kernel.cols();
  if (stride < 1) fail(Err::ShapeChain, "stride must be at least one");
  if (kh == 0 || kw == 0 || kh > in_h || kw > in_w)
    fail(Err::ShapeChain, "kernel does not fit the input");
  const std::size_t oh = (in_h - kh) / stride + 1;
  const std::size_t ow = (in_w - kw) / stride + 1;
  Matrix d(oh * ow, in_h * in_w);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const std::size_t r = i * ow + j;
      for (std::size_t ki = 0; ki < kh; ++ki)
        for (std::size_t kj = 0; kj < kw; ++kj)
          d(r, (i * stride + ki) * in_w + (j * stride + kj)) = kernel(ki, kj);
    }
  return d;
}

MaxPoolImport import_maxpool(std::size_t inputs,
                             const std::vector<std::vector<std::size_t>>& regions) {
  std::vector<bool> seen(inputs, false);
  std::size_t total = 0;
  for (const auto& region : regions) {
    if (region.empty()) fail(Err::NotAPartition, "empty pooling region");
    for (std::size_t idx : region) {
      if (idx >= inputs || seen[idx])
        fail(Err::NotAPartition, "pooling regions must partition the input");
      seen[idx] = true;
      ++total;
    }
  }
  if (total != inputs) fail(Err::NotAPartition, "pooling regions leave inputs uncovered");

  const std::size_t q = regions.size();
  Matrix b(inputs, inputs);
  std::vector<std::size_t> groups;
  std::size_t row = 0;
  for (const auto& region : regions) {
    groups.push_back(region.size());
    for (std::size_t idx : region) b(row++, idx) = 1.0;
  }
  Matrix c(q, inputs);
  for (std::size_t i = 0; i < q; ++i) c(i, i) = 1.0;

  BlockStructure s = BlockStructure::single(inputs, ActivationKind::maxpool(groups));
  ImplicitModel model(Matrix(inputs, inputs), b, c, Matrix(q, inputs), s);
  return {std::move(b), std::move(c), std::move(s), std::move(model)};
}

std::vector<std::vector<std::size_t>> pool_regions(std::size_t h, std::size_t w, std::size_t ph,
                                                   std::size_t pw) {
  if (ph == 0 || pw == 0 || h % ph != 0 || w % pw != 0)
    fail(Err::NotAPartition, "pool window must tile the image");
  std::vector<std::vector<std::size_t>> regions;
  for (std::size_t bi = 0; bi < h / ph; ++bi)
    for (std::size_t bj = 0; bj < w / pw; ++bj) {
      std::vector<std::size_t> region;
      for (std::size_t i = 0; i < ph; ++i)
        for (std::size_t j = 0; j < pw; ++j)
          region.push_back((bi * ph + i) * w + (bj * pw + j));
      regions.push_back(std::move(region));
    }
  return regions;
}

ImplicitModel import_residual(const Matrix& w1, const Matrix& w2, const ActivationKind& phi1,
                              const ActivationKind& phi2) {
  const std::size_t p = w1.cols(), h = w1.rows();
  if (w2.rows() != p || w2.cols() != h) fail(Err::ShapeChain, "residual weights do not chain");
  const std::size_t n = p + h;

  Matrix a(n, n);
  place(a, 0, p, w2);
  Matrix b(n, p);
  place(b, 0, 0, Matrix::identity(p));
  place(b, p, 0, w1);
  Matrix c(p, n);
  place(c, 0, 0, Matrix::identity(p));
  BlockStructure s(std::vector<Block>{{p, phi2}, {h, phi1}});
  return ImplicitModel(std::move(a), std::move(b), std::move(c), Matrix(p, p), std::move(s));
}

ImplicitModel import_rnn(const Matrix& wh, const Matrix& wi, const Matrix& wo,
                         std::size_t t_steps, const ActivationKind& phi_h,
                         const ActivationKind& phi_o) {
  const std::size_t nh = wh.rows();
  if (wh.cols() != nh) fail(Err::ShapeChain, "state transition must be square");
  if (wi.rows() != nh || wo.cols() != nh) fail(Err::ShapeChain, "recurrent weights do not chain");
  if (t_steps < 1) fail(Err::ShapeChain, "need at least one step");
  if (!phi_h.componentwise() || !phi_h.zero_at_zero())
    fail(Err::Unsupported,
         "the unrolled form needs a componentwise state activation vanishing at zero");

  const std::size_t pin = wi.cols();
  const std::size_t n = (t_steps + 1) * nh;  // (h_T, ..., h_1, h_0)
  const std::size_t p = t_steps * pin;       // (u_T, ..., u_1)

  Matrix a(n, n), b(n, p);
  for (std::size_t t = 0; t < t_steps; ++t) {
    place(a, t * nh, (t + 1) * nh, wh);
    place(b, t * nh, t * pin, wi);
  }
  Matrix c(wo.rows(), n);
  place(c, 0, 0, wo);
  Matrix d(wo.rows(), p);

  std::vector<Block> blocks(t_steps + 1, Block{nh, phi_h});
  ImplicitModel m(std::move(a), std::move(b), std::move(c), std::move(d),
                  BlockStructure(std::move(blocks)));
  if (phi_o.kind == Act::Identity) return m;
  return lift_output_activation(m, phi_o);
}

ImplicitModel import_batchnorm(const Vector& mean, const Vector& sigma) {
  if (mean.size() != sigma.size()) fail(Err::DimMismatch, "batchnorm statistics");
  const std::size_t p = mean.size();
  for (double s : sigma)
    if (!(s > 0.0)) fail(Err::NonPositiveVariance, "batchnorm scale must be positive");
  Matrix d(p, p);
  Vector bias(p);
  for (std::size_t i = 0; i < p; ++i) {
    d(i, i) = 1.0 / sigma[i];
    bias[i] = -mean[i] / sigma[i];
  }
  return lift_affine(Matrix(0, 0), Matrix(0, p), Matrix(p, 0), d, {}, bias, BlockStructure());
}

// ---- layer stacks ----

namespace {

std::size_t layer_output_dim(const LayerSpec& layer, std::size_t in_dim, std::size_t index) {
  return std::visit(
      [&](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>) {
          if (l.w.cols() != in_dim) fail(Err::ShapeChain, "dense layer " + std::to_string(index));
          return l.w.rows();
        } else if constexpr (std::is_same_v<T, Conv2DLayer>) {
          if (l.in_h * l.in_w != in_dim)
            fail(Err::ShapeChain, "conv layer " + std::to_string(index));
          const std::size_t oh = (l.in_h - l.kernel.rows()) / l.stride + 1;
          const std::size_t ow = (l.in_w - l.kernel.cols()) / l.stride + 1;
          return oh * ow;
        } else if constexpr (std::is_same_v<T, MaxPoolLayer>) {
          if (l.in_h * l.in_w != in_dim)
            fail(Err::ShapeChain, "pool layer " + std::to_string(index));
          return (l.in_h / l.pool_h) * (l.in_w / l.pool_w);
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          if (l.mean.size() != in_dim)
            fail(Err::ShapeChain, "batchnorm layer " + std::to_string(index));
          return in_dim;
        } else {
          return in_dim;
        }
      },
      layer);
}

std::size_t first_layer_input_dim(const LayerSpec& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>) return l.w.cols();
        else if constexpr (std::is_same_v<T, Conv2DLayer>) return l.in_h * l.in_w;
        else if constexpr (std::is_same_v<T, MaxPoolLayer>) return l.in_h * l.in_w;
        else if constexpr (std::is_same_v<T, BatchNormLayer>) return l.mean.size();
        else fail(Err::ShapeChain, "the first layer must declare its width");
      },
      layer);
}

// Model for one layer over the augmented input (u, 1).
ImplicitModel layer_model(const LayerSpec& layer, std::size_t in_dim) {
  return std::visit(
      [&](const auto& l) -> ImplicitModel {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>) {
          Matrix d(l.w.rows(), in_dim + 1);
          place(d, 0, 0, l.w);
          return ImplicitModel(Matrix(0, 0), Matrix(0, in_dim + 1), Matrix(l.w.rows(), 0), d,
                               BlockStructure());
        } else if constexpr (std::is_same_v<T, Conv2DLayer>) {
          Matrix conv = conv2d_matrix(l.kernel, l.in_h, l.in_w, l.stride);
          Matrix d(conv.rows(), in_dim + 1);
          place(d, 0, 0, conv);
          return ImplicitModel(Matrix(0, 0), Matrix(0, in_dim + 1), Matrix(conv.rows(), 0), d,
                               BlockStructure());
        } else if constexpr (std::is_same_v<T, MaxPoolLayer>) {
          MaxPoolImport pool =
              import_maxpool(in_dim, pool_regions(l.in_h, l.in_w, l.pool_h, l.pool_w));
          const std::size_t n = pool.model.state_dim(), q = pool.model.output_dim();
          Matrix b(n, in_dim + 1);
          place(b, 0, 0, pool.b);
          return ImplicitModel(Matrix(n, n), std::move(b), pool.c, Matrix(q, in_dim + 1),
                               pool.structure);
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          Matrix d(in_dim, in_dim + 1);
          for (std::size_t i = 0; i < in_dim; ++i) {
            if (!(l.sigma[i] > 0.0)) fail(Err::NonPositiveVariance, "batchnorm scale");
            d(i, i) = 1.0 / l.sigma[i];
            d(i, in_dim) = -l.mean[i] / l.sigma[i];
          }
          return ImplicitModel(Matrix(0, 0), Matrix(0, in_dim + 1), Matrix(in_dim, 0), d,
                               BlockStructure());
        } else {
          // activation layer: x = phi(u), read out the state
          Matrix b(in_dim, in_dim + 1);
          place(b, 0, 0, Matrix::identity(in_dim));
          return ImplicitModel(Matrix(in_dim, in_dim), std::move(b), Matrix::identity(in_dim),
                               Matrix(in_dim, in_dim + 1), BlockStructure::single(in_dim, l.act));
        }
      },
      layer);
}

// Appends a constant-one row to the output so the next stage can read its
// own augmented input; the constant travels via the last input coordinate.
ImplicitModel extend_with_one(const ImplicitModel& m) {
  const std::size_t q = m.output_dim(), n = m.state_dim(), p = m.input_dim();
  Matrix c(q + 1, n);
  place(c, 0, 0, m.c());
  Matrix d(q + 1, p);
  place(d, 0, 0, m.d());
  d(q, p - 1) = 1.0;
  return ImplicitModel(m.a(), m.b(), std::move(c), std::move(d), m.structure());
}

}  // namespace

NetworkImport build_network_model(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) fail(Err::ShapeChain, "empty layer stack");
  const std::size_t raw_inputs = first_layer_input_dim(layers[0]);

  std::size_t cur = raw_inputs;
  ImplicitModel total = layer_model(layers[0], cur);
  cur = layer_output_dim(layers[0], cur, 0);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    total = cascade(extend_with_one(total), layer_model(layers[i], cur));
    cur = layer_output_dim(layers[i], cur, i);
  }
  return {std::move(total), raw_inputs};
}

Vector evaluate_layers(const std::vector<LayerSpec>& layers, const Vector& u) {
  Vector x = u;
  for (const LayerSpec& layer : layers) {
    x = std::visit(
        [&](const auto& l) -> Vector {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DenseLayer>) {
            return matvec(l.w, x);
          } else if constexpr (std::is_same_v<T, Conv2DLayer>) {
            return matvec(conv2d_matrix(l.kernel, l.in_h, l.in_w, l.stride), x);
          } else if constexpr (std::is_same_v<T, MaxPoolLayer>) {
            auto regions = pool_regions(l.in_h, l.in_w, l.pool_h, l.pool_w);
            Vector out;
            out.reserve(regions.size());
            for (const auto& region : regions) {
              double mx = x[region[0]];
              for (std::size_t idx : region) mx = std::max(mx, x[idx]);
              out.push_back(mx);
            }
            return out;
          } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
            Vector out(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - l.mean[i]) / l.sigma[i];
            return out;
          } else {
            return apply_activation(BlockStructure::single(x.size(), l.act), x);
          }
        },
        layer);
  }
  return x;
}

// ---- file format ----

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok, std::size_t lineno) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    fail(Err::MalformedFile, "bad number '" + tok + "' at line " + std::to_string(lineno));
  if (!std::isfinite(v))
    fail(Err::NonFiniteEntry, "non-finite entry at line " + std::to_string(lineno));
  return v;
}

std::size_t parse_count(const std::string& tok, std::size_t lineno) {
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    fail(Err::MalformedFile, "bad count '" + tok + "' at line " + std::to_string(lineno));
  return v;
}

struct Reader {
  std::istream& is;
  std::size_t lineno = 0;

  std::vector<std::string> next_tokens() {
    std::string line;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream ss(line);
      std::vector<std::string> toks;
      std::string t;
      while (ss >> t) toks.push_back(t);
      if (!toks.empty()) return toks;
    }
    return {};
  }

  std::vector<std::string> require_tokens() {
    auto t = next_tokens();
    if (t.empty()) fail(Err::MalformedFile, "unexpected end of file");
    return t;
  }

  Matrix read_matrix(std::size_t rows, std::size_t cols) {
    std::vector<double> data;
    data.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
      auto toks = require_tokens();
      if (toks.size() != cols)
        fail(Err::MalformedFile, "expected " + std::to_string(cols) + " entries at line " +
                                     std::to_string(lineno));
      for (const auto& tok : toks) data.push_back(parse_double(tok, lineno));
    }
    return Matrix(rows, cols, std::move(data));
  }
};

ActivationKind parse_activation_token(const std::vector<std::string>& toks, std::size_t from,
                                      std::size_t lineno) {
  if (from >= toks.size()) fail(Err::MalformedFile, "missing activation name");
  const std::string& name = toks[from];
  if (name == "relu") return ActivationKind::relu();
  if (name == "tanh") return ActivationKind::tanh();
  if (name == "sigmoid") return ActivationKind::sigmoid();
  if (name == "softmax") return ActivationKind::softmax();
  if (name == "identity") return ActivationKind::identity();
  if (name == "leakyrelu") {
    if (from + 1 >= toks.size()) fail(Err::MalformedFile, "leakyrelu needs a slope");
    return ActivationKind::leaky_relu(parse_double(toks[from + 1], lineno));
  }
  fail(Err::MalformedFile, "unknown activation '" + name + "' at line " + std::to_string(lineno));
}

}  // namespace

std::vector<LayerSpec> read_nnspec(std::istream& is) {
  Reader in{is};
  {
    auto header = in.require_tokens();
    if (header.empty() || header[0] != "NNSPEC") fail(Err::MalformedFile, "missing NNSPEC header");
    if (header.size() != 2 || header[1] != "v1")
      fail(Err::VersionMismatch, "unsupported NNSPEC version");
  }
  std::vector<LayerSpec> layers;
  for (auto toks = in.next_tokens(); !toks.empty(); toks = in.next_tokens()) {
    const std::string& kind = toks[0];
    if (kind == "dense") {
      if (toks.size() != 3) fail(Err::MalformedFile, "dense needs rows and cols");
      auto rows = parse_count(toks[1], in.lineno), cols = parse_count(toks[2], in.lineno);
      layers.push_back(DenseLayer{in.read_matrix(rows, cols)});
    } else if (kind == "conv") {
      if (toks.size() != 6) fail(Err::MalformedFile, "conv needs kh kw h w stride");
      auto kh = parse_count(toks[1], in.lineno), kw = parse_count(toks[2], in.lineno);
      auto h = parse_count(toks[3], in.lineno), w = parse_count(toks[4], in.lineno);
      auto stride = parse_count(toks[5], in.lineno);
      layers.push_back(Conv2DLayer{in.read_matrix(kh, kw), h, w, stride});
    } else if (kind == "maxpool") {
      if (toks.size() != 5) fail(Err::MalformedFile, "maxpool needs h w ph pw");
      layers.push_back(MaxPoolLayer{parse_count(toks[1], in.lineno),
                                    parse_count(toks[2], in.lineno),
                                    parse_count(toks[3], in.lineno),
                                    parse_count(toks[4], in.lineno)});
    } else if (kind == "batchnorm") {
      if (toks.size() != 2) fail(Err::MalformedFile, "batchnorm needs a width");
      auto nbn = parse_count(toks[1], in.lineno);
      Matrix mean = in.read_matrix(1, nbn);
      Matrix sigma = in.read_matrix(1, nbn);
      Vector mv(mean.data(), mean.data() + nbn), sv(sigma.data(), sigma.data() + nbn);
      layers.push_back(BatchNormLayer{std::move(mv), std::move(sv)});
    } else if (kind == "activation") {
      layers.push_back(ActivationLayer{parse_activation_token(toks, 1, in.lineno)});
    } else {
      fail(Err::MalformedFile, "unknown layer '" + kind + "' at line " + std::to_string(in.lineno));
    }
  }
  if (layers.empty()) fail(Err::MalformedFile, "no layers");
  return layers;
}

std::vector<LayerSpec> read_nnspec_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Err::MalformedFile, "cannot open " + path);
  return read_nnspec(f);
}

void write_nnspec(std::ostream& os, const std::vector<LayerSpec>& layers) {
  os << "NNSPEC v1\n";
  for (const LayerSpec& layer : layers) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DenseLayer>) {
            os << "dense " << l.w.rows() << ' ' << l.w.cols() << '\n';
            for (std::size_t i = 0; i < l.w.rows(); ++i) {
              for (std::size_t j = 0; j < l.w.cols(); ++j)
                os << (j ? " " : "") << format_double(l.w(i, j));
              os << '\n';
            }
          } else if constexpr (std::is_same_v<T, Conv2DLayer>) {
            os << "conv " << l.kernel.rows() << ' ' << l.kernel.cols() << ' ' << l.in_h << ' '
               << l.in_w << ' ' << l.stride << '\n';
            for (std::size_t i = 0; i < l.kernel.rows(); ++i) {
              for (std::size_t j = 0; j < l.kernel.cols(); ++j)
                os << (j ? " " : "") << format_double(l.kernel(i, j));
              os << '\n';
            }
          } else if constexpr (std::is_same_v<T, MaxPoolLayer>) {
            os << "maxpool " << l.in_h << ' ' << l.in_w << ' ' << l.pool_h << ' ' << l.pool_w
               << '\n';
          } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
            os << "batchnorm " << l.mean.size() << '\n';
            for (std::size_t i = 0; i < l.mean.size(); ++i)
              os << (i ? " " : "") << format_double(l.mean[i]);
            os << '\n';
            for (std::size_t i = 0; i < l.sigma.size(); ++i)
              os << (i ? " " : "") << format_double(l.sigma[i]);
            os << '\n';
          } else {
            os << "activation " << l.act.name();
            if (l.act.kind == Act::LeakyRelu) os << ' ' << format_double(l.act.slope);
            os << '\n';
          }
        },
        layer);
  }
}

}  // namespace idl
