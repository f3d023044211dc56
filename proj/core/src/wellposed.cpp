#include "idl/wellposed.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace idl {

WellPosednessReport check_cone_pf(const Matrix& a, double margin, double tol,
                                  std::size_t max_iter) {
  PfResult pf = pf_eigen(abs(a), tol, max_iter);
  WellPosednessReport r;
  r.method = WpMethod::ConePF;
  r.lambda = pf.lambda;
  r.margin = margin;
  r.certified = pf.lambda < 1.0 - margin;
  return r;
}

NormMatrixSet norm_matrices(const ImplicitModel& m) {
  const auto& s = m.structure();
  const auto& blocks = s.blocks();
  const std::size_t nb = blocks.size();
  const std::size_t p = m.input_dim(), q = m.output_dim();

  NormMatrixSet out;
  out.na = Matrix(nb, nb);
  out.nb = Matrix(nb, p);
  out.nc = Matrix(q, nb);
  out.na_exact.assign(nb * nb, true);

  for (std::size_t l = 0; l < nb; ++l) {
    const std::size_t ro = s.block_offset(l), rs = blocks[l].size;
    const Lp pl = blocks[l].act.norm_index();
    for (std::size_t h = 0; h < nb; ++h) {
      const std::size_t co = s.block_offset(h), cs = blocks[h].size;
      Matrix sub(rs, cs);
      for (std::size_t i = 0; i < rs; ++i)
        for (std::size_t j = 0; j < cs; ++j) sub(i, j) = m.a()(ro + i, co + j);
      NormValue nv = induced_norm(sub, blocks[h].act.norm_index(), pl);
      out.na(l, h) = nv.value;
      out.na_exact[l * nb + h] = nv.exact;
    }
    for (std::size_t i = 0; i < p; ++i) {
      Vector col(rs);
      for (std::size_t r2 = 0; r2 < rs; ++r2) col[r2] = m.b()(ro + r2, i);
      out.nb(l, i) = vector_norm(col, pl);
    }
    for (std::size_t i = 0; i < q; ++i) {
      Vector row(rs);
      for (std::size_t c2 = 0; c2 < rs; ++c2) row[c2] = m.c()(i, ro + c2);
      out.nc(i, l) = vector_norm(row, dual_index(pl));
    }
  }
  return out;
}

WellPosednessReport check_blip_pf(const ImplicitModel& m, double margin) {
  NormMatrixSet nm = norm_matrices(m);
  Matrix scaled = nm.na;
  const auto& blocks = m.structure().blocks();
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const double gamma = blocks[l].act.lipschitz();
    for (std::size_t h = 0; h < blocks.size(); ++h) scaled(l, h) *= gamma;
  }
  PfResult pf = pf_eigen(scaled);
  WellPosednessReport r;
  r.method = WpMethod::BlipPF;
  r.lambda = pf.lambda;
  r.margin = margin;
  r.certified = pf.lambda < 1.0 - margin;
  if (std::find(nm.na_exact.begin(), nm.na_exact.end(), false) != nm.na_exact.end())
    r.note = "some induced-norm entries are upper bounds; certification is conservative";
  return r;
}

namespace {

// Tarjan strongly connected components; returns components in reverse
// topological order of the condensation.
class Tarjan {
 public:
  explicit Tarjan(const std::vector<std::vector<std::size_t>>& adj)
      : adj_(adj), index_(adj.size(), kNone), low_(adj.size(), 0), on_stack_(adj.size(), false) {
    for (std::size_t v = 0; v < adj.size(); ++v)
      if (index_[v] == kNone) strongconnect(v);
  }

  std::vector<std::vector<std::size_t>> components;

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  void strongconnect(std::size_t root) {
    // iterative to keep deep graphs off the call stack
    struct Frame { std::size_t v; std::size_t edge; };
    std::vector<Frame> call;
    call.push_back({root, 0});
    index_[root] = low_[root] = counter_++;
    stack_.push_back(root);
    on_stack_[root] = true;

    while (!call.empty()) {
      auto& [v, edge] = call.back();
      if (edge < adj_[v].size()) {
        std::size_t w = adj_[v][edge++];
        if (index_[w] == kNone) {
          index_[w] = low_[w] = counter_++;
          stack_.push_back(w);
          on_stack_[w] = true;
          call.push_back({w, 0});
        } else if (on_stack_[w]) {
          low_[v] = std::min(low_[v], index_[w]);
        }
      } else {
        if (low_[v] == index_[v]) {
          std::vector<std::size_t> comp;
          std::size_t w;
          do {
            w = stack_.back();
            stack_.pop_back();
            on_stack_[w] = false;
            comp.push_back(w);
          } while (w != v);
          std::sort(comp.begin(), comp.end());
          components.push_back(std::move(comp));
        }
        call.pop_back();
        if (!call.empty()) {
          auto& parent = call.back();
          low_[parent.v] = std::min(low_[parent.v], low_[v]);
        }
      }
    }
  }

  const std::vector<std::vector<std::size_t>>& adj_;
  std::vector<std::size_t> index_, low_;
  std::vector<bool> on_stack_;
  std::vector<std::size_t> stack_;
  std::size_t counter_ = 0;
};

Matrix submatrix(const Matrix& a, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& cols) {
  Matrix s(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) s(i, j) = a(rows[i], cols[j]);
  return s;
}

}  // namespace

WellPosednessReport check_structural(const Matrix& a, const BlockStructure& s, double margin) {
  if (a.rows() != s.dim() || a.cols() != s.dim()) fail(Err::DimMismatch, "check_structural");
  WellPosednessReport r;
  r.method = WpMethod::Structural;
  r.margin = margin;
  r.certified = true;
  r.lambda = 0.0;

  const bool scalar_level = s.all_componentwise();
  const auto& blocks = s.blocks();
  const std::size_t units = scalar_level ? s.dim() : blocks.size();

  auto unit_range = [&](std::size_t u) -> std::pair<std::size_t, std::size_t> {
    if (scalar_level) return {u, 1};
    return {s.block_offset(u), blocks[u].size};
  };

  std::vector<std::vector<std::size_t>> adj(units);
  for (std::size_t u = 0; u < units; ++u) {
    auto [uo, us] = unit_range(u);
    for (std::size_t v = 0; v < units; ++v) {
      if (u == v) continue;
      auto [vo, vs] = unit_range(v);
      bool nonzero = false;
      for (std::size_t i = 0; i < us && !nonzero; ++i)
        for (std::size_t j = 0; j < vs && !nonzero; ++j)
          if (a(uo + i, vo + j) != 0.0) nonzero = true;
      if (nonzero) adj[u].push_back(v);
    }
  }

  Tarjan tarjan(adj);
  // reverse topological -> topological
  std::reverse(tarjan.components.begin(), tarjan.components.end());

  for (const auto& comp : tarjan.components) {
    SccReport sr;
    sr.members = comp;
    sr.exact_scalar = false;

    if (scalar_level && comp.size() == 1) {
      const std::size_t i = comp[0];
      const double aii = a(i, i);
      const ActivationKind kind = s.kind_at(i);
      if (kind.kind == Act::Relu) {
        // exact: a ReLU scalar loop is well-posed iff the diagonal is below one
        sr.exact_scalar = true;
        sr.lambda = std::fabs(aii);
        sr.certified = aii < 1.0 - margin;
      } else {
        sr.lambda = std::fabs(aii);
        sr.certified = sr.lambda < 1.0 - margin;
      }
      r.lambda = std::max(r.lambda, sr.lambda);
      r.certified = r.certified && sr.certified;
      r.components.push_back(std::move(sr));
      continue;
    }

    if (scalar_level) {
      Matrix sub = submatrix(a, comp, comp);
      PfResult pf = pf_eigen(abs(sub));
      sr.lambda = pf.lambda;
      sr.certified = pf.lambda < 1.0 - margin;
    } else {
      // assemble the sub-model restricted to the component's blocks
      std::vector<std::size_t> states;
      std::vector<Block> sub_blocks;
      for (std::size_t u : comp) {
        auto [uo, us] = unit_range(u);
        for (std::size_t i = 0; i < us; ++i) states.push_back(uo + i);
        sub_blocks.push_back(blocks[u]);
      }
      Matrix sub = submatrix(a, states, states);
      const std::size_t ns = states.size();
      ImplicitModel probe(sub, Matrix(ns, 0), Matrix(0, ns), Matrix(0, 0),
                          BlockStructure(sub_blocks));
      WellPosednessReport blip = check_blip_pf(probe, margin);
      sr.lambda = blip.lambda;
      sr.certified = blip.certified;
    }
    r.lambda = std::max(r.lambda, sr.lambda);
    r.certified = r.certified && sr.certified;
    r.components.push_back(std::move(sr));
  }
  return r;
}

ImplicitModel rescale(const ImplicitModel& m) {
  for (const Block& b : m.structure().blocks()) {
    if (!b.act.componentwise() || !b.act.positively_homogeneous())
      fail(Err::NotHomogeneous, "rescale needs a positively homogeneous componentwise activation");
  }
  const std::size_t n = m.state_dim();
  if (n == 0) return m;

  Matrix aa = abs(m.a());
  PfResult pf = pf_eigen(aa, 1e-12, 100000);
  if (pf.lambda >= 1.0) fail(Err::IllPosed, "rescale: spectral radius >= 1");

  Vector w = pf.eigvec;
  double wmin = *std::min_element(w.begin(), w.end());
  if (wmin <= 1e-8) {
    // Reducible |A| can zero out eigenvector entries; an all-ones
    // perturbation forces positivity at the cost of a tiny eigenvalue shift.
    constexpr double eps = 1e-12;
    for (std::size_t i = 0; i < aa.size(); ++i) aa.data()[i] += eps;
    w = pf_eigen(aa, 1e-12, 100000).eigvec;
  }
  // scaling uses 1/w
  Matrix a2(n, n), b2(m.state_dim(), m.input_dim()), c2(m.output_dim(), n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a2(i, j) = m.a()(i, j) * w[j] / w[i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.input_dim(); ++j) b2(i, j) = m.b()(i, j) / w[i];
  for (std::size_t i = 0; i < m.output_dim(); ++i)
    for (std::size_t j = 0; j < n; ++j) c2(i, j) = m.c()(i, j) * w[j];
  return ImplicitModel(std::move(a2), std::move(b2), std::move(c2), m.d(), m.structure());
}

double lipschitz_kappa(const ImplicitModel& m) {
  const double na = norm_inf_op(m.a());
  if (na >= 1.0) fail(Err::IllPosed, "lipschitz_kappa: |A|_inf >= 1");
  return norm_inf_op(m.b()) * norm_inf_op(m.c()) / (1.0 - na) + norm_inf_op(m.d());
}

double robust_penalty(const ImplicitModel& m) {
  const double na = norm_inf_op(m.a());
  if (na >= 1.0) fail(Err::IllPosed, "robust_penalty: |A|_inf >= 1");
  const double nb = norm_inf_op(m.b()), nc = norm_inf_op(m.c());
  return 0.5 * (nb * nb + nc * nc) / (1.0 - na) + norm_inf_op(m.d());
}

std::string render_report(const WellPosednessReport& r) {
  std::ostringstream os;
  const char* method = r.method == WpMethod::ConePF    ? "cone-pf"
                       : r.method == WpMethod::BlipPF  ? "blip-pf"
                                                       : "structural";
  os << "method: " << method << '\n';
  os << "lambda: " << r.lambda << '\n';
  os << "margin: " << r.margin << '\n';
  os << "certified: " << (r.certified ? "true" : "false") << '\n';
  for (std::size_t i = 0; i < r.components.size(); ++i) {
    const SccReport& c = r.components[i];
    os << "component " << i << ": size=" << c.members.size() << " lambda=" << c.lambda
       << " certified=" << (c.certified ? "true" : "false")
       << (c.exact_scalar ? " exact" : "") << '\n';
  }
  if (!r.note.empty()) os << "note: " << r.note << '\n';
  return os.str();
}

}  // namespace idl
