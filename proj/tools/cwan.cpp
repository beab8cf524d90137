#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cwan/cli.hpp"

namespace {

void add_train_flags(CLI::App& app, cwan::TrainConfig& c, std::string& lg, std::string& weighting) {
  app.add_option("--beta", c.beta, "Weight of the adversarial term")->capture_default_str();
  app.add_option("--tau", c.tau, "Weight-decay coefficient")->capture_default_str();
  app.add_option("--dc", c.d_c, "Common-subspace width")->capture_default_str();
  app.add_option("--hidden", c.hidden, "Transformer hidden width")->capture_default_str();
  app.add_option("--lr-fg", c.lr_fg, "Adam learning rate for transformers and classifier")->capture_default_str();
  app.add_option("--lr-d", c.lr_d, "Adam learning rate for the discriminator")->capture_default_str();
  app.add_option("--iters", c.iterations, "Training iterations")->capture_default_str();
  app.add_option("--lg", lg, "Second-layer agreement term: l1, l2, off or tied")->capture_default_str();
  app.add_option("--weighting", weighting, "Source weighting: conditional or ones")->capture_default_str();
}

void finish_train_flags(cwan::TrainConfig& c, const std::string& lg, const std::string& weighting) {
  c.lg_norm = cwan::parse_lg_mode(lg);
  c.weighting = cwan::parse_weighting(weighting);
  c.validate();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multisource heterogeneous domain adaptation with conditional source weighting"};
  app.set_version_flag("--version", cwan::cli::kVersion);
  app.require_subcommand(1);

  // synth
  cwan::cli::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate shared-latent synthetic domains");
  synth_cmd->add_option("--dims", synth.dims, "Widths, e.g. 100:1000:100,target=2000")->capture_default_str();
  synth_cmd->add_option("--classes", synth.spec.classes, "Class count")->capture_default_str();
  synth_cmd->add_option("--per-class", synth.spec.per_class, "Samples per class in each source")->capture_default_str();
  synth_cmd->add_option("--labeled-per-class", synth.spec.labeled_per_class, "Labeled target samples per class")
      ->capture_default_str();
  synth_cmd->add_option("--unlabeled", synth.spec.unlabeled, "Unlabeled target samples")->capture_default_str();
  synth_cmd->add_option("--latent-dim", synth.spec.latent_dim, "Latent dimension")->capture_default_str();
  synth_cmd->add_option("--spread", synth.spec.spread, "Latent class spread")->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise, "Observation noise scale")->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_flag("--standardize", synth.spec.standardize, "z-score every domain");
  synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();

  // train
  cwan::cli::TrainOptions train;
  std::string train_lg = "l1", train_weighting = "conditional";
  auto* train_cmd = app.add_subcommand("train", "Train on domain files");
  train_cmd->add_option("--source", train.sources, "Labeled source domain file (repeatable)");
  train_cmd->add_option("--target", train.target, "Target domain file with ground-truth labels");
  train_cmd->add_option("--labeled-per-class", train.labeled_per_class, "Labeled target samples per class")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "Initialization and split seed")->capture_default_str();
  train_cmd->add_flag("--standardize", train.standardize, "z-score every domain before training");
  train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--export-embeddings", train.export_embeddings, "Write final embeddings to this file");
  add_train_flags(*train_cmd, train.config, train_lg, train_weighting);

  // experiment
  cwan::cli::ExperimentOptions exp;
  std::string exp_lg = "l1", exp_weighting = "conditional";
  std::string seeds = "0..9", variants = "full", ns = "0,2,4,6,8,10";
  exp.config.iterations = 300;
  auto* exp_cmd = app.add_subcommand("experiment", "Run repeated seeded experiments");
  exp_cmd->add_option("kind", exp.kind, "ablate, noise or sweep")->required();
  exp_cmd->add_option("--seeds", seeds, "Seeds: a..b or a comma list")->capture_default_str();
  exp_cmd->add_option("--variants", variants, "Comma list of ablation variants")->capture_default_str();
  exp_cmd->add_option("--ns", ns, "Source counts for the sweep")->capture_default_str();
  exp_cmd->add_option("--noise-dim", exp.noise_dim, "Width of the injected noise source")->capture_default_str();
  exp_cmd->add_option("--source", exp.sources, "Source domain file instead of synthetic data (repeatable)");
  exp_cmd->add_option("--target", exp.target, "Target domain file instead of synthetic data");
  exp_cmd->add_option("--labeled-per-class", exp.labeled_per_class, "Labeled target samples per class")
      ->capture_default_str();
  exp_cmd->add_option("--spread", exp.spec.spread, "Synthetic latent class spread")->capture_default_str();
  exp_cmd->add_option("--noise", exp.spec.noise, "Synthetic observation noise")->capture_default_str();
  exp_cmd->add_option("--data-seed", exp.spec.seed, "Synthetic data seed")->capture_default_str();
  exp_cmd->add_option("--jobs", exp.jobs, "Parallel runs")->capture_default_str();
  exp_cmd->add_option("--out", exp.out, "Output directory")->capture_default_str();
  add_train_flags(*exp_cmd, exp.config, exp_lg, exp_weighting);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (*synth_cmd) {
      const auto paths = cwan::cli::cmd_synth(synth);
      std::cout << "wrote " << paths.size() << " domain files to " << synth.out << '\n';
    } else if (*train_cmd) {
      finish_train_flags(train.config, train_lg, train_weighting);
      cwan::cli::cmd_train(train, std::cout);
    } else if (*exp_cmd) {
      finish_train_flags(exp.config, exp_lg, exp_weighting);
      exp.seeds = cwan::cli::parse_seeds(seeds);
      exp.variants = cwan::cli::parse_variants(variants);
      exp.ns = cwan::cli::parse_counts(ns);
      cwan::cli::cmd_experiment(exp, std::cout);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
