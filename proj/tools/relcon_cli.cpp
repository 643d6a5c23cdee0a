// Command-line driver for the self-supervised accelerometry pipeline:
// synthetic data generation, distance-network and encoder training, window
// embedding, probes, fine-tuning and the cross-run ablation report.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relcon/config.hpp"
#include "relcon/errors.hpp"
#include "relcon/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> ablations;
  std::string loss_variant;
  std::string preset = "desk";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* config_opt =
      cmd->add_option("--config", args.config_path, "Run configuration JSON");
  if (config_required) config_opt->required();
  cmd->add_option("--out", args.out_dir, "Output directory")->required();
  cmd->add_option("--seed", args.seed, "Override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--ablate", args.ablations,
                  "Apply a named ablation (repeatable): no_augmentations, "
                  "no_revin, no_sparsemax, no_within_subject");
  cmd->add_option("--loss", args.loss_variant,
                  "Loss variant: relcon, binary, log_ratio");
  cmd->add_option("--preset", args.preset,
                  "Base preset when no --config is given: desk or paper");
}

relcon::RunConfig resolve_config(const CommonArgs& args) {
  relcon::RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = relcon::load_run_config(args.config_path);
  } else if (args.preset == "paper") {
    cfg = relcon::paper_run_config();
  } else if (args.preset == "desk") {
    cfg = relcon::desk_run_config();
  } else {
    throw relcon::ConfigError("unknown preset '" + args.preset + "'");
  }
  if (args.seed_set) cfg.seed = args.seed;
  for (const auto& name : args.ablations) relcon::apply_ablation(cfg, name);
  if (!args.loss_variant.empty()) {
    cfg.loss.variant = relcon::loss_variant_from_name(args.loss_variant);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relcon: relative contrastive pre-training for accelerometry"};
  app.require_subcommand(1);

  CommonArgs gen_args, dist_args, enc_args, embed_args, probe_args, ft_args;
  std::string dist_ckpt, enc_ckpt;
  std::vector<std::string> report_runs;
  std::string report_baseline, report_out;

  auto* gen = app.add_subcommand("gen-synth",
                                 "Generate the synthetic motif dataset");
  add_common(gen, gen_args, /*config_required=*/false);

  auto* dist = app.add_subcommand("train-distance",
                                  "Train the motif distance network");
  add_common(dist, dist_args);

  auto* enc = app.add_subcommand(
      "train-encoder", "Pre-train the encoder with the frozen distance");
  add_common(enc, enc_args);
  enc->add_option("--distnet", dist_ckpt, "Frozen distance checkpoint")
      ->required();

  auto* embed = app.add_subcommand("embed", "Embed evaluation windows to CSV");
  add_common(embed, embed_args);
  embed->add_option("--encoder", enc_ckpt, "Encoder checkpoint")->required();

  auto* probe = app.add_subcommand(
      "probe", "Frozen-embedding probes (classification + regression)");
  add_common(probe, probe_args);
  probe->add_option("--encoder", enc_ckpt, "Encoder checkpoint")->required();

  auto* ft = app.add_subcommand("finetune",
                                "Fine-tune the encoder with a linear head");
  add_common(ft, ft_args);
  ft->add_option("--encoder", enc_ckpt, "Encoder checkpoint")->required();

  auto* report = app.add_subcommand(
      "report", "Join run metrics into a comparison table with % deltas");
  report->add_option("runs", report_runs, "Run directories with metrics.json")
      ->required()
      ->expected(-1);
  report->add_option("--baseline", report_baseline,
                     "Baseline run name (default: first run)");
  report->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      relcon::run_gen_synth(resolve_config(gen_args), gen_args.out_dir);
    } else if (dist->parsed()) {
      const auto ckpt =
          relcon::run_train_distance(resolve_config(dist_args), dist_args.out_dir);
      std::cout << "distance checkpoint: " << ckpt << "\n";
    } else if (enc->parsed()) {
      const auto ckpt = relcon::run_train_encoder(resolve_config(enc_args),
                                                  dist_ckpt, enc_args.out_dir);
      std::cout << "encoder checkpoint: " << ckpt << "\n";
    } else if (embed->parsed()) {
      relcon::run_embed(resolve_config(embed_args), enc_ckpt,
                        embed_args.out_dir);
    } else if (probe->parsed()) {
      relcon::run_probe(resolve_config(probe_args), enc_ckpt,
                        probe_args.out_dir);
    } else if (ft->parsed()) {
      relcon::run_finetune(resolve_config(ft_args), enc_ckpt, ft_args.out_dir);
    } else if (report->parsed()) {
      std::cout << relcon::run_report(report_runs, report_baseline, report_out);
    }
  } catch (const relcon::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const relcon::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const relcon::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
