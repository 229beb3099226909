#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "svpc/commands.hpp"

namespace {

using svpc::cli::Options;

void common_flags(CLI::App* sub, Options& o, bool needs_config) {
  auto* cfg = sub->add_option("--config", o.config, "run configuration (JSON)");
  if (needs_config) cfg->required();
  cfg->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory")->required();
  sub->add_option("--seed", o.seed, "override every seed in the config");
  sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svpc: polyconvex envelopes by linear programming and input convex networks"};
  app.set_version_flag("--version", svpc::kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto* pc = app.add_subcommand("polyconvexify", "envelope values on a lattice by LP");
  common_flags(pc, o, true);

  auto* gd = app.add_subcommand("gen-data", "generate a learning dataset");
  common_flags(gd, o, true);

  auto* tr = app.add_subcommand("train", "train a network or an ensemble");
  common_flags(tr, o, false);
  tr->add_option("--data", o.data, "dataset directory from gen-data")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* pr = app.add_subcommand("predict", "evaluate checkpoints at query points");
  common_flags(pr, o, false);
  pr->add_option("--model", o.models, "checkpoint file (repeat for an ensemble)")
      ->required()
      ->check(CLI::ExistingFile);
  pr->add_option("--queries", o.queries, "CSV with nu_*, zeta_* and optional nuk_* columns")
      ->required()
      ->check(CLI::ExistingFile);
  pr->add_flag("--symmetrize", o.symmetrize, "average over the symmetry group");

  auto* ev = app.add_subcommand("eval", "error reports and cross-sections");
  common_flags(ev, o, false);
  ev->add_option("--model", o.models, "checkpoint file (repeat for an ensemble)")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--field", o.field, "envelope CSV to overlay on cross-sections")
      ->check(CLI::ExistingFile);

  auto* cs = app.add_subcommand("cross-section", "cross-section tables and plots");
  common_flags(cs, o, true);
  cs->add_option("--model", o.models, "checkpoint file (repeat for an ensemble)")
      ->check(CLI::ExistingFile);
  cs->add_option("--field", o.field, "envelope CSV")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (pc->parsed()) return svpc::cli::cmd_polyconvexify(o);
    if (gd->parsed()) return svpc::cli::cmd_gen_data(o);
    if (tr->parsed()) return svpc::cli::cmd_train(o);
    if (pr->parsed()) return svpc::cli::cmd_predict(o);
    if (ev->parsed()) return svpc::cli::cmd_eval(o);
    if (cs->parsed()) return svpc::cli::cmd_cross_section(o);
  } catch (const std::exception& e) {
    std::cerr << "svpc: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
