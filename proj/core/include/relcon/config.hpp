#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relcon/augment.hpp"
#include "relcon/data.hpp"
#include "relcon/distnet.hpp"
#include "relcon/encoder.hpp"
#include "relcon/eval.hpp"
#include "relcon/loss.hpp"
#include "relcon/sampler.hpp"

namespace relcon {

// One JSON file configures every stage; CLI flags override individual
// fields. Seeds are always explicit so reruns are reproducible.

struct DataConfig {
  std::string path;          // dataset directory (dataset.json + CSVs)
  SyntheticSpec synthetic;   // used by gen-synth
  std::size_t window_length = 64;
  std::size_t window_stride = 64;  // evaluation windows; training draws offsets
  std::array<double, 3> split_ratios{0.5, 0.25, 0.25};  // when manifest has none
};

struct StageTrainConfig {
  int steps = 0;
  int batch_size = 0;
  double lr = 1e-3;
};

struct EvalStageConfig {
  ProbeKind probe = ProbeKind::kLinearClf;
  double ridge_lambda = 1e-3;
  int repeats = 5;
  int mlp_hidden = 64;
  int clf_steps = 400;
  double clf_lr = 0.05;
  std::vector<std::string> regression_targets{"stride_velocity",
                                              "double_support_time"};
  StageTrainConfig finetune{200, 16, 1e-3};
};

struct AblationFlags {
  bool no_augmentations = false;
  bool no_revin = false;
  bool no_sparsemax = false;
  bool no_within_subject = false;
};

struct RunConfig {
  std::uint64_t seed = 7;
  DataConfig data;
  DistNetHyper distnet;
  StageTrainConfig distnet_train{2000, 16, 1e-3};
  AugmentationPipeline augment;  // distance-training candidates
  SamplerConfig sampler;
  EncoderHyper encoder;
  StageTrainConfig encoder_train{5000, 16, 1e-3};
  LossConfig loss;
  EvalStageConfig eval;
  AblationFlags ablations;

  void validate() const;
};

// Desk preset: T=64 windows, distnet d=16/k=7, candidate set 8 (4 within,
// 4 between), batch 16, distnet 2k steps, encoder 5k steps.
RunConfig desk_run_config();
// Full-scale preset: T=256, distnet d=64/k=15, ResNet-34-like encoder,
// batch 64, candidate set 20, 1e5 steps.
RunConfig paper_run_config();

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Applies one named ablation; each flag changes exactly one documented
// behavior (no_augmentations -> identity distance-training pipeline;
// no_revin -> distnet.revin off; no_sparsemax -> softmax attention;
// no_within_subject -> SimCLR-style sampler).
void apply_ablation(RunConfig& config, const std::string& name);

std::string effective_config_json(const RunConfig& config);

}  // namespace relcon
