#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "idl/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"implicit deep learning models: conversion, certification, training and attacks"};
  app.require_subcommand(1);

  idltool::CommonFlags flags;
  std::string synth_kind, nnspec_path, eval_path;
  std::size_t synth_m = 200;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--model", flags.model, "model file");
    cmd->add_option("--data", flags.data, "delimiter-separated data file");
    cmd->add_option("--config", flags.config, "key=value configuration file");
    cmd->add_option("--seed", flags.seed, "random seed");
    cmd->add_option("--kappa", flags.kappa, "row-sum budget for A");
    cmd->add_option("--tol", flags.tol, "solver tolerance");
    cmd->add_option("--out", flags.out, "output path");
    cmd->add_option("--budget-fraction", flags.budget_fraction, "fraction of inputs to perturb");
    cmd->add_option("--k", flags.card_k, "cardinality budget");
    cmd->add_option("--rank", flags.rank, "low-rank compression rank");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("kind", synth_kind, "regression or classification")->required();
  synth->add_option("--m", synth_m, "sample count");
  add_common(synth);

  CLI::App* convert = app.add_subcommand("convert", "build an implicit model from a network file");
  convert->add_option("nnspec", nnspec_path, "NNSPEC layer file")->required();
  add_common(convert);

  CLI::App* predict = app.add_subcommand("predict", "evaluate a model on data columns");
  add_common(predict);

  CLI::App* train = app.add_subcommand("train", "projected gradient training");
  train->add_option("--eval", eval_path, "held-out data for a test metric");
  add_common(train);

  CLI::App* analyze = app.add_subcommand("analyze", "certificates, norms and sensitivity");
  add_common(analyze);

  CLI::App* attack = app.add_subcommand("attack", "generate adversarial inputs");
  add_common(attack);

  CLI::App* compress = app.add_subcommand("compress", "sparsity and low-rank reductions");
  add_common(compress);

  CLI::App* rescale = app.add_subcommand("rescale", "diagonal similarity scaling");
  add_common(rescale);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return idltool::cmd_synth(synth_kind, synth_m, flags);
    if (convert->parsed()) return idltool::cmd_convert(nnspec_path, flags);
    if (predict->parsed()) return idltool::cmd_predict(flags);
    if (train->parsed()) return idltool::cmd_train(flags, eval_path);
    if (analyze->parsed()) return idltool::cmd_analyze(flags);
    if (attack->parsed()) return idltool::cmd_attack(flags);
    if (compress->parsed()) return idltool::cmd_compress(flags);
    if (rescale->parsed()) return idltool::cmd_rescale(flags);
  } catch (const idl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
