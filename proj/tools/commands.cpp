#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "idl/compose.hpp"
#include "idl/compress.hpp"
#include "idl/dataset.hpp"
#include "idl/model.hpp"
#include "idl/rng.hpp"
#include "idl/robustness.hpp"
#include "idl/training.hpp"
#include "idl/wellposed.hpp"

namespace idltool {

using namespace idl;

namespace {

void require(bool ok, const char* msg) {
  if (!ok) fail(Err::InvalidArgument, msg);
}

void print_matrix(std::ostream& os, const char* name, const Matrix& m) {
  os << name << ": " << m.rows() << " x " << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? " " : "  ") << m(i, j);
    os << '\n';
  }
}

std::vector<std::string> numbered(const char* prefix, std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

Matrix append_ones_row(const Matrix& u) {
  Matrix out(u.rows() + 1, u.cols());
  for (std::size_t j = 0; j < u.cols(); ++j) {
    for (std::size_t i = 0; i < u.rows(); ++i) out(i, j) = u(i, j);
    out(u.rows(), j) = 1.0;
  }
  return out;
}

double classification_accuracy(const Matrix& yhat, const Matrix& y) {
  std::size_t hits = 0;
  for (std::size_t j = 0; j < y.cols(); ++j) {
    std::size_t ah = 0, at = 0;
    for (std::size_t i = 1; i < y.rows(); ++i) {
      if (yhat(i, j) > yhat(ah, j)) ah = i;
      if (y(i, j) > y(at, j)) at = i;
    }
    hits += ah == at;
  }
  return static_cast<double>(hits) / static_cast<double>(y.cols());
}

double rmse(const Matrix& yhat, const Matrix& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = yhat.data()[i] - y.data()[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.cols()));
}

}  // namespace

int cmd_synth(const std::string& kind, std::size_t m, const CommonFlags& flags) {
  require(!flags.out.empty(), "synth needs --out");
  DatasetKind dk;
  if (kind == "regression") dk = DatasetKind::Regression;
  else if (kind == "classification") dk = DatasetKind::Classification;
  else fail(Err::InvalidArgument, "kind must be regression or classification");
  Dataset ds = generate_synthetic(dk, m, flags.seed);
  save_dataset_file(flags.out, ds);
  std::cout << "dataset: " << flags.out << '\n'
            << "kind: " << kind << '\n'
            << "samples: " << ds.u.cols() << '\n'
            << "features: " << ds.u.rows() << '\n';
  return 0;
}

int cmd_convert(const std::string& nnspec_path, const CommonFlags& flags) {
  require(!flags.out.empty(), "convert needs --out");
  auto layers = read_nnspec_file(nnspec_path);
  NetworkImport imported = build_network_model(layers);
  save_model_file(flags.out, imported.model);

  auto report = check_structural(imported.model.a(), imported.model.structure());
  std::cout << "model: " << flags.out << '\n'
            << "raw_inputs: " << imported.raw_inputs << '\n'
            << "model_inputs: " << imported.model.input_dim() << " (trailing constant 1)" << '\n'
            << "states: " << imported.model.state_dim() << '\n'
            << "outputs: " << imported.model.output_dim() << '\n'
            << render_report(report);

  // probe set: raw inputs through the source layers, stored augmented
  const std::size_t probes = 20;
  auto rng = make_rng(flags.seed, "convert.probe");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix pu(imported.raw_inputs + 1, probes);
  Matrix py(imported.model.output_dim(), probes);
  Vector u(imported.raw_inputs);
  for (std::size_t j = 0; j < probes; ++j) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = unit(rng);
      pu(i, j) = u[i];
    }
    pu(imported.raw_inputs, j) = 1.0;
    Vector out = evaluate_layers(layers, u);
    for (std::size_t i = 0; i < out.size(); ++i) py(i, j) = out[i];
  }
  Matrix stacked(pu.rows() + py.rows(), probes);
  for (std::size_t j = 0; j < probes; ++j) {
    for (std::size_t i = 0; i < pu.rows(); ++i) stacked(i, j) = pu(i, j);
    for (std::size_t i = 0; i < py.rows(); ++i) stacked(pu.rows() + i, j) = py(i, j);
  }
  std::vector<std::string> header = numbered("u", pu.rows());
  for (const std::string& n : numbered("y", py.rows())) header.push_back(n);
  write_columns_csv(flags.out + ".probe", stacked, header);
  std::cout << "probe: " << flags.out << ".probe" << '\n';
  return 0;
}

int cmd_predict(const CommonFlags& flags) {
  require(!flags.model.empty(), "predict needs --model");
  require(!flags.data.empty(), "predict needs --data");
  require(!flags.out.empty(), "predict needs --out");
  ImplicitModel m = load_model_file(flags.model);

  std::vector<std::string> header;
  Matrix columns = read_columns_csv(flags.data, &header);
  // columns named y* hold expected outputs (probe files); drop them
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i].empty() || header[i][0] != 'y') keep.push_back(i);
  Matrix u(keep.size(), columns.cols());
  for (std::size_t j = 0; j < columns.cols(); ++j)
    for (std::size_t i = 0; i < keep.size(); ++i) u(i, j) = columns(keep[i], j);
  if (u.rows() + 1 == m.input_dim()) u = append_ones_row(u);
  if (u.rows() != m.input_dim()) fail(Err::DimMismatch, "data width does not match the model");

  SolveOptions opts;
  opts.tol = flags.tol;
  Matrix yhat = predict_batch(m, u, opts);
  write_columns_csv(flags.out, yhat, numbered("y", yhat.rows()));
  std::cout << "predictions: " << flags.out << '\n' << "samples: " << yhat.cols() << '\n';
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& eval_path) {
  require(!flags.data.empty(), "train needs --data");
  require(!flags.out.empty(), "train needs --out");
  Config cfg = flags.config.empty() ? Config() : Config::from_file(flags.config);

  const std::string kind = cfg.get("kind", "regression");
  LoadSchema schema;
  schema.kind = kind == "classification" ? DatasetKind::Classification : DatasetKind::Regression;
  schema.label_columns = {cfg.get("label", schema.kind == DatasetKind::Classification ? "label" : "y")};
  Dataset ds = load_dataset_file(flags.data, schema);

  const bool augment = cfg.get_flag("augment", true);
  Matrix u = augment ? append_ones_row(ds.u) : ds.u;

  TrainConfig tc;
  tc.kappa = cfg.get_real("kappa", flags.kappa);
  tc.learning_rate = cfg.get_real("lr", 0.05);
  tc.batch_size = cfg.get_count("batch", 32);
  tc.epochs = cfg.get_count("epochs", 10);
  tc.seed = cfg.get_count("seed", flags.seed);
  tc.tol = cfg.get_real("tol", flags.tol);
  tc.l1_penalty = cfg.get_real("l1", 0.0);
  tc.two_stage = cfg.get_flag("two_stage", false);
  tc.ridge = cfg.get_real("ridge", 1e-6);

  LossSpec loss{schema.kind == DatasetKind::Classification ? LossKind::CrossEntropySoftmax
                                                           : LossKind::SquaredFrobenius};
  const std::size_t n = cfg.get_count("n", 50);
  ImplicitModel m0 = init_model(n, u.rows(), ds.y.rows(), ActivationKind::relu(), tc.kappa,
                                tc.seed ^ 0x517cc1b727220a95ULL);
  TrainResult result = sgd_train(m0, u, ds.y, loss, tc);
  save_model_file(flags.out, result.model);

  {
    std::ofstream hist(flags.out + ".history");
    hist << "epoch,loss,a_norm_inf,wall_ms\n";
    char buf[32];
    for (const EpochStats& e : result.history) {
      hist << e.epoch << ',';
      auto r1 = std::to_chars(buf, buf + sizeof(buf), e.loss);
      hist << std::string_view(buf, r1.ptr - buf) << ',';
      auto r2 = std::to_chars(buf, buf + sizeof(buf), e.a_norm_inf);
      hist << std::string_view(buf, r2.ptr - buf) << ',';
      auto r3 = std::to_chars(buf, buf + sizeof(buf), e.wall_ms);
      hist << std::string_view(buf, r3.ptr - buf) << '\n';
    }
  }

  SolveOptions opts;
  opts.tol = tc.tol;
  Matrix yhat = predict_batch(result.model, u, opts);
  std::cout << "model: " << flags.out << '\n'
            << "history: " << flags.out << ".history" << '\n'
            << "epochs: " << result.history.size() << '\n'
            << "final_loss: " << result.history.back().loss << '\n'
            << "a_norm_inf: " << result.history.back().a_norm_inf << '\n';
  if (schema.kind == DatasetKind::Classification) {
    std::cout << "train_accuracy: " << classification_accuracy(yhat, ds.y) << '\n';
  } else {
    std::cout << "train_rmse: " << rmse(yhat, ds.y) << '\n';
  }

  if (!eval_path.empty()) {
    Dataset test = load_dataset_file(eval_path, schema);
    Matrix tu = augment ? append_ones_row(test.u) : test.u;
    Matrix ty = predict_batch(result.model, tu, opts);
    if (schema.kind == DatasetKind::Classification) {
      std::cout << "test_accuracy: " << classification_accuracy(ty, test.y) << '\n';
    } else {
      std::cout << "test_rmse: " << rmse(ty, test.y) << '\n';
    }
  }
  return 0;
}

int cmd_analyze(const CommonFlags& flags) {
  require(!flags.model.empty(), "analyze needs --model");
  ImplicitModel m = load_model_file(flags.model);
  Config cfg = flags.config.empty() ? Config() : Config::from_file(flags.config);

  std::cout << "model: " << flags.model << '\n'
            << "states: " << m.state_dim() << '\n'
            << "inputs: " << m.input_dim() << '\n'
            << "outputs: " << m.output_dim() << '\n';
  std::cout << "blocks:";
  for (const Block& b : m.structure().blocks()) std::cout << ' ' << b.act.name() << ':' << b.size;
  std::cout << '\n';

  std::cout << "-- structural --\n" << render_report(check_structural(m.a(), m.structure()));
  if (m.structure().all_componentwise())
    std::cout << "-- cone --\n" << render_report(check_cone_pf(m.a()));
  std::cout << "-- blip --\n" << render_report(check_blip_pf(m));

  const double na = norm_inf_op(m.a());
  std::cout << "a_norm_inf: " << na << '\n';
  if (na < 1.0) {
    std::cout << "kappa: " << lipschitz_kappa(m) << '\n'
              << "robust_penalty: " << robust_penalty(m) << '\n';
  } else {
    std::cout << "kappa: unavailable (|A|_inf >= 1)\n";
  }

  const SensMethod method =
      m.structure().all_componentwise() ? SensMethod::Cone : SensMethod::Blip;
  BoxUncertainty box;
  box.sigma_u.assign(m.input_dim(), cfg.get_real("sigma_u", 0.1));
  box.u0.assign(m.input_dim(), 0.0);
  if (!flags.data.empty()) {
    Matrix columns = read_columns_csv(flags.data);
    if (columns.rows() + 1 == m.input_dim()) columns = append_ones_row(columns);
    if (columns.rows() != m.input_dim()) fail(Err::DimMismatch, "data width vs model input");
    for (std::size_t i = 0; i < m.input_dim(); ++i) box.u0[i] = columns(i, 0);
  }

  SensitivityReport rep = sensitivity(m, method, &box);
  std::cout << "sensitivity_method: " << (method == SensMethod::Cone ? "cone" : "blip") << '\n';
  print_matrix(std::cout, "S", rep.s);
  if (!rep.sigma_x.empty()) {
    std::cout << "sigma_x:";
    for (double v : rep.sigma_x) std::cout << ' ' << v;
    std::cout << '\n';
  }
  std::cout << "sigma_u: " << box.sigma_u[0] << '\n';
  std::cout << "sigma_y:";
  for (double v : rep.sigma_y) std::cout << ' ' << v;
  std::cout << '\n';
  std::cout << "eta_bound:";
  for (double v : state_norm_bound_blip(m, box)) std::cout << ' ' << v;
  std::cout << '\n';
  return 0;
}

int cmd_attack(const CommonFlags& flags) {
  require(!flags.model.empty(), "attack needs --model");
  require(!flags.out.empty(), "attack needs --out");
  ImplicitModel m = load_model_file(flags.model);
  Config cfg = flags.config.empty() ? Config() : Config::from_file(flags.config);
  const std::string kind = cfg.get("kind", "lp");

  Vector u0(m.input_dim(), 0.0);
  if (!flags.data.empty()) {
    Matrix columns = read_columns_csv(flags.data);
    if (columns.rows() + 1 == m.input_dim()) columns = append_ones_row(columns);
    if (columns.rows() != m.input_dim()) fail(Err::DimMismatch, "data width vs model input");
    const std::size_t pick = cfg.get_count("sample", 0);
    if (pick >= columns.cols()) fail(Err::InvalidArgument, "sample index out of range");
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = columns(i, pick);
  }

  Vector sigma_u(m.input_dim(), cfg.get_real("sigma_u", 0.1));
  Vector u_adv;

  if (kind == "sensitivity") {
    Vector magnitude(m.input_dim(), cfg.get_real("magnitude", 0.5));
    Vector lo(m.input_dim(), cfg.get_real("input_lo", -1.0));
    Vector hi(m.input_dim(), cfg.get_real("input_hi", 1.0));
    std::optional<std::size_t> row;
    if (cfg.has("target_row")) row = cfg.get_count("target_row", 0);
    u_adv = sensitivity_attack(m, u0, flags.budget_fraction, magnitude, row, &lo, &hi);
    std::cout << "attack: sensitivity\n"
              << "fraction: " << flags.budget_fraction << '\n';
  } else if (kind == "lp" || kind == "card" || kind == "discrepancy") {
    Uncertainty set = BoxUncertainty{u0, sigma_u};
    if (kind == "card") set = CardUncertainty{u0, sigma_u, flags.card_k};
    AttackResult res;
    if (kind == "discrepancy") {
      res = discrepancy_attack(m, set, nullptr, cfg.get_count("iters", 10), flags.seed);
      std::cout << "attack: discrepancy\n";
    } else {
      Vector c(m.state_dim(), 1.0);
      res = lp_attack(m, set, c);
      std::cout << "attack: " << kind << '\n';
    }
    std::cout << "upper_bound: " << res.upper_bound << '\n'
              << "objective_achieved: " << res.objective_achieved << '\n'
              << "feasible: " << (res.feasible ? "true" : "false") << '\n';
    u_adv = std::move(res.u_adv);
  } else {
    fail(Err::InvalidArgument, "attack kind must be lp, card, discrepancy or sensitivity");
  }

  Matrix out(u_adv.size(), 1);
  for (std::size_t i = 0; i < u_adv.size(); ++i) out(i, 0) = u_adv[i];
  write_columns_csv(flags.out, out, numbered("u", u_adv.size()));
  std::cout << "u_adv: " << flags.out << '\n';
  return 0;
}

int cmd_compress(const CommonFlags& flags) {
  require(!flags.model.empty(), "compress needs --model");
  require(!flags.out.empty(), "compress needs --out");
  ImplicitModel m = load_model_file(flags.model);

  auto rows = reduce_rows(m);
  auto cols = reduce_columns(m);
  std::cout << "-- row reduction --\n" << render_reduction(rows);
  std::cout << "-- column reduction --\n" << render_reduction(cols);

  std::cout << "feature_scores:";
  for (double v : feature_selection_scores(m)) std::cout << ' ' << v;
  std::cout << '\n';

  if (flags.rank > 0) {
    auto rep = lowrank_compress(m, flags.rank);
    std::cout << "-- low rank --\n"
              << "rank: " << flags.rank << '\n'
              << "residual_fro: " << norm_fro(rep.error) << '\n'
              << "lambda_reduced: " << rep.lambda_reduced << '\n'
              << "reduced_wellposed: " << (rep.reduced_wellposed ? "true" : "false") << '\n'
              << "lambda_full: " << rep.lambda_full << '\n'
              << "bound_available: " << (rep.bound_available ? "true" : "false") << '\n';
    if (!rep.reduced_wellposed)
      std::cout << "note: reduced solve not certified; keep the full matrix\n";
    ImplicitModel compressed(matmul_nt(rep.left, rep.right), m.b(), m.c(), m.d(), m.structure());
    save_model_file(flags.out, compressed);
  } else if (rows.reduced_model) {
    save_model_file(flags.out, *rows.reduced_model);
  } else if (cols.reduced_model) {
    save_model_file(flags.out, *cols.reduced_model);
  } else {
    save_model_file(flags.out, m);
    std::cout << "note: no full reduction available; wrote the original model\n";
  }
  std::cout << "model: " << flags.out << '\n';
  return 0;
}

int cmd_rescale(const CommonFlags& flags) {
  require(!flags.model.empty(), "rescale needs --model");
  require(!flags.out.empty(), "rescale needs --out");
  ImplicitModel m = load_model_file(flags.model);
  const double before = norm_inf_op(m.a());
  ImplicitModel scaled = rescale(m);
  save_model_file(flags.out, scaled);
  std::cout << "lambda: " << pf_eigen(abs(m.a())).lambda << '\n'
            << "a_norm_inf_before: " << before << '\n'
            << "a_norm_inf_after: " << norm_inf_op(scaled.a()) << '\n'
            << "model: " << flags.out << '\n';
  return 0;
}

}  // namespace idltool
