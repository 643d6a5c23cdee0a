#include "relcon/config.hpp"

#include <fstream>

#include <json.hpp>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

using nlohmann::json;

json spec_to_json(const AugmentationSpec& s) {
  json j;
  j["kind"] = augment_kind_name(s.kind);
  j["probability"] = s.probability;
  switch (s.kind) {
    case AugmentKind::kRotation3d:
      j["random_axis"] = s.random_axis;
      j["axis"] = s.axis;
      j["angle_min"] = s.angle_min;
      j["angle_max"] = s.angle_max;
      break;
    case AugmentKind::kJitter:
      j["sigma"] = s.jitter_sigma;
      j["sigma_is_relative"] = s.sigma_is_relative;
      break;
    case AugmentKind::kScale:
      j["scale_min"] = s.scale_min;
      j["scale_max"] = s.scale_max;
      break;
    case AugmentKind::kChannelShuffle:
      j["random_perm"] = s.random_perm;
      j["perm"] = s.channel_perm;
      break;
    case AugmentKind::kTimeWarp:
      j["knots"] = s.warp_knots;
      j["max_speed_ratio"] = s.warp_max_speed_ratio;
      break;
    default:
      break;
  }
  return j;
}

AugmentationSpec spec_from_json(const json& j) {
  AugmentationSpec s;
  s.kind = augment_kind_from_name(j.at("kind").get<std::string>());
  s.probability = j.value("probability", 1.0);
  s.random_axis = j.value("random_axis", s.random_axis);
  if (j.contains("axis")) s.axis = j.at("axis").get<std::array<double, 3>>();
  s.angle_min = j.value("angle_min", s.angle_min);
  s.angle_max = j.value("angle_max", s.angle_max);
  s.jitter_sigma = j.value("sigma", s.jitter_sigma);
  s.sigma_is_relative = j.value("sigma_is_relative", s.sigma_is_relative);
  s.scale_min = j.value("scale_min", s.scale_min);
  s.scale_max = j.value("scale_max", s.scale_max);
  s.random_perm = j.value("random_perm", s.random_perm);
  if (j.contains("perm")) {
    s.channel_perm = j.at("perm").get<std::array<int, 3>>();
  }
  s.warp_knots = j.value("knots", s.warp_knots);
  s.warp_max_speed_ratio = j.value("max_speed_ratio", s.warp_max_speed_ratio);
  s.validate();
  return s;
}

void merge_synthetic(SyntheticSpec& spec, const json& j) {
  spec.n_users = j.value("n_users", spec.n_users);
  spec.n_classes = j.value("n_classes", spec.n_classes);
  spec.motifs_per_class = j.value("motifs_per_class", spec.motifs_per_class);
  spec.recordings_per_user_class =
      j.value("recordings_per_user_class", spec.recordings_per_user_class);
  spec.samples_per_recording =
      j.value("samples_per_recording", spec.samples_per_recording);
  spec.sample_rate_hz = j.value("sample_rate_hz", spec.sample_rate_hz);
  spec.base_freq_hz = j.value("base_freq_hz", spec.base_freq_hz);
  spec.freq_step_hz = j.value("freq_step_hz", spec.freq_step_hz);
  spec.class_sep = j.value("class_sep", spec.class_sep);
  spec.user_tempo_min = j.value("user_tempo_min", spec.user_tempo_min);
  spec.user_tempo_max = j.value("user_tempo_max", spec.user_tempo_max);
  spec.user_amp_min = j.value("user_amp_min", spec.user_amp_min);
  spec.user_amp_max = j.value("user_amp_max", spec.user_amp_max);
  spec.user_rotation_max_rad =
      j.value("user_rotation_max_rad", spec.user_rotation_max_rad);
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  if (j.contains("split_ratios")) {
    spec.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
  }
  spec.user_index_offset = j.value("user_index_offset", spec.user_index_offset);
  spec.seed = j.value("seed", spec.seed);
}

json synthetic_to_json(const SyntheticSpec& s) {
  json j;
  j["n_users"] = s.n_users;
  j["n_classes"] = s.n_classes;
  j["motifs_per_class"] = s.motifs_per_class;
  j["recordings_per_user_class"] = s.recordings_per_user_class;
  j["samples_per_recording"] = s.samples_per_recording;
  j["sample_rate_hz"] = s.sample_rate_hz;
  j["base_freq_hz"] = s.base_freq_hz;
  j["freq_step_hz"] = s.freq_step_hz;
  j["class_sep"] = s.class_sep;
  j["user_tempo_min"] = s.user_tempo_min;
  j["user_tempo_max"] = s.user_tempo_max;
  j["user_amp_min"] = s.user_amp_min;
  j["user_amp_max"] = s.user_amp_max;
  j["user_rotation_max_rad"] = s.user_rotation_max_rad;
  j["noise_sigma"] = s.noise_sigma;
  j["split_ratios"] = s.split_ratios;
  j["user_index_offset"] = s.user_index_offset;
  j["seed"] = s.seed;
  return j;
}

void merge_train(StageTrainConfig& t, const json& j) {
  t.steps = j.value("steps", t.steps);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lr = j.value("lr", t.lr);
}

}  // namespace

void RunConfig::validate() const {
  distnet.validate();
  encoder.validate();
  loss.validate();
  sampler.validate();
  for (const auto& s : augment.specs) s.validate();
  if (data.window_length < 2) {
    throw ConfigError("config: window_length must be >= 2");
  }
  if (data.window_stride == 0) {
    throw ConfigError("config: window_stride must be >= 1");
  }
  if (distnet_train.steps < 0 || encoder_train.steps < 0) {
    throw ConfigError("config: step counts must be >= 0");
  }
  if (distnet_train.batch_size < 1 || encoder_train.batch_size < 1) {
    throw ConfigError("config: batch sizes must be >= 1");
  }
  if (eval.repeats < 1) throw ConfigError("config: eval.repeats must be >= 1");
  if (data.window_length < encoder.min_input_length()) {
    throw ConfigError(
        "config: window_length is below the encoder's minimum receptive "
        "length");
  }
}

RunConfig desk_run_config() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.data.window_length = 64;
  cfg.data.window_stride = 64;
  cfg.distnet = desk_distnet_hyper();
  cfg.distnet_train = {2000, 16, 1e-3};
  cfg.augment = default_distance_pipeline(cfg.seed);
  cfg.sampler.candidate_count = 8;
  cfg.sampler.within_user_count = 4;
  cfg.encoder = desk_encoder_hyper();
  cfg.encoder_train = {5000, 16, 1e-3};
  cfg.loss.temperature = 1.0;
  cfg.loss.variant = LossVariant::kRelCon;
  return cfg;
}

RunConfig paper_run_config() {
  RunConfig cfg = desk_run_config();
  cfg.data.window_length = 256;
  cfg.data.window_stride = 256;
  cfg.data.synthetic.samples_per_recording = 2560;
  cfg.data.synthetic.sample_rate_hz = 100.0;
  cfg.distnet = paper_distnet_hyper();
  cfg.distnet_train = {100000, 64, 1e-3};
  cfg.sampler.candidate_count = 20;
  cfg.sampler.within_user_count = 10;
  cfg.encoder = paper_encoder_hyper();
  cfg.encoder_train = {100000, 64, 1e-3};
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  RunConfig cfg = j.value("preset", "desk") == std::string("paper")
                      ? paper_run_config()
                      : desk_run_config();
  try {
    cfg.seed = j.value("seed", cfg.seed);

    if (j.contains("data")) {
      const json& d = j["data"];
      cfg.data.path = d.value("path", cfg.data.path);
      cfg.data.window_length = d.value("window_length", cfg.data.window_length);
      cfg.data.window_stride = d.value("window_stride", cfg.data.window_stride);
      if (d.contains("split_ratios")) {
        cfg.data.split_ratios =
            d.at("split_ratios").get<std::array<double, 3>>();
      }
      if (d.contains("synthetic")) {
        merge_synthetic(cfg.data.synthetic, d["synthetic"]);
      }
    }

    if (j.contains("distnet")) {
      const json& d = j["distnet"];
      cfg.distnet.embed_dim = d.value("embed_dim", cfg.distnet.embed_dim);
      cfg.distnet.kernel_size = d.value("kernel_size", cfg.distnet.kernel_size);
      if (d.contains("dilations")) {
        cfg.distnet.dilations = d.at("dilations").get<std::vector<int>>();
      }
      if (d.contains("normalizer")) {
        cfg.distnet.normalizer =
            attention_normalizer_from_name(d.at("normalizer").get<std::string>());
      }
      cfg.distnet.revin = d.value("revin", cfg.distnet.revin);
      cfg.distnet.revin_literal_order =
          d.value("revin_literal_order", cfg.distnet.revin_literal_order);
      cfg.distnet.eps = d.value("eps", cfg.distnet.eps);
      merge_train(cfg.distnet_train, d);
    }

    if (j.contains("augment")) {
      const json& a = j["augment"];
      cfg.augment.rng_seed = a.value("rng_seed", cfg.augment.rng_seed);
      if (a.contains("specs")) {
        cfg.augment.specs.clear();
        for (const auto& js : a["specs"]) {
          cfg.augment.specs.push_back(spec_from_json(js));
        }
      }
    }

    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      cfg.sampler.candidate_count =
          s.value("candidate_count", cfg.sampler.candidate_count);
      cfg.sampler.within_user_count =
          s.value("within_user_count", cfg.sampler.within_user_count);
      cfg.sampler.include_augmented_self =
          s.value("include_augmented_self", cfg.sampler.include_augmented_self);
      cfg.sampler.augment_between =
          s.value("augment_between", cfg.sampler.augment_between);
    }

    if (j.contains("encoder")) {
      const json& e = j["encoder"];
      if (e.value("preset", "") == std::string("paper")) {
        cfg.encoder = paper_encoder_hyper();
      } else if (e.value("preset", "") == std::string("desk")) {
        cfg.encoder = desk_encoder_hyper();
      }
      cfg.encoder.stem_width = e.value("stem_width", cfg.encoder.stem_width);
      cfg.encoder.stem_kernel = e.value("stem_kernel", cfg.encoder.stem_kernel);
      cfg.encoder.stem_stride = e.value("stem_stride", cfg.encoder.stem_stride);
      if (e.contains("stage_widths")) {
        cfg.encoder.stage_widths =
            e.at("stage_widths").get<std::vector<int>>();
      }
      if (e.contains("stage_blocks")) {
        cfg.encoder.stage_blocks =
            e.at("stage_blocks").get<std::vector<int>>();
      }
      if (e.contains("stage_strides")) {
        cfg.encoder.stage_strides =
            e.at("stage_strides").get<std::vector<int>>();
      }
      cfg.encoder.block_kernel = e.value("block_kernel", cfg.encoder.block_kernel);
      cfg.encoder.embed_dim = e.value("embed_dim", cfg.encoder.embed_dim);
      cfg.encoder.norm_eps = e.value("norm_eps", cfg.encoder.norm_eps);
      merge_train(cfg.encoder_train, e);
    }

    if (j.contains("loss")) {
      const json& l = j["loss"];
      cfg.loss.temperature = l.value("temperature", cfg.loss.temperature);
      if (l.contains("variant")) {
        cfg.loss.variant =
            loss_variant_from_name(l.at("variant").get<std::string>());
      }
      cfg.loss.normalize_embeddings =
          l.value("normalize_embeddings", cfg.loss.normalize_embeddings);
    }

    if (j.contains("eval")) {
      const json& e = j["eval"];
      if (e.contains("probe")) {
        cfg.eval.probe = probe_kind_from_name(e.at("probe").get<std::string>());
      }
      cfg.eval.ridge_lambda = e.value("ridge_lambda", cfg.eval.ridge_lambda);
      cfg.eval.repeats = e.value("repeats", cfg.eval.repeats);
      cfg.eval.mlp_hidden = e.value("mlp_hidden", cfg.eval.mlp_hidden);
      cfg.eval.clf_steps = e.value("clf_steps", cfg.eval.clf_steps);
      cfg.eval.clf_lr = e.value("clf_lr", cfg.eval.clf_lr);
      if (e.contains("regression_targets")) {
        cfg.eval.regression_targets =
            e.at("regression_targets").get<std::vector<std::string>>();
      }
      if (e.contains("finetune")) merge_train(cfg.eval.finetune, e["finetune"]);
    }

    if (j.contains("ablations")) {
      const json& a = j["ablations"];
      cfg.ablations.no_augmentations =
          a.value("no_augmentations", cfg.ablations.no_augmentations);
      cfg.ablations.no_revin = a.value("no_revin", cfg.ablations.no_revin);
      cfg.ablations.no_sparsemax =
          a.value("no_sparsemax", cfg.ablations.no_sparsemax);
      cfg.ablations.no_within_subject =
          a.value("no_within_subject", cfg.ablations.no_within_subject);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // Named ablation flags resolve into the concrete stage fields here, so an
  // effective-config diff shows exactly the documented change.
  if (cfg.ablations.no_augmentations) cfg.augment.specs.clear();
  if (cfg.ablations.no_revin) cfg.distnet.revin = false;
  if (cfg.ablations.no_sparsemax) {
    cfg.distnet.normalizer = AttentionNormalizer::kSoftmax;
  }
  if (cfg.ablations.no_within_subject) {
    cfg.sampler.within_user_count = 0;
    cfg.sampler.include_augmented_self = true;
    cfg.sampler.augment_between = true;
  }

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  return parse_run_config(text);
}

void apply_ablation(RunConfig& config, const std::string& name) {
  if (name == "no_augmentations") {
    config.ablations.no_augmentations = true;
    config.augment.specs.clear();
  } else if (name == "no_revin") {
    config.ablations.no_revin = true;
    config.distnet.revin = false;
  } else if (name == "no_sparsemax") {
    config.ablations.no_sparsemax = true;
    config.distnet.normalizer = AttentionNormalizer::kSoftmax;
  } else if (name == "no_within_subject") {
    config.ablations.no_within_subject = true;
    config.sampler.within_user_count = 0;
    config.sampler.include_augmented_self = true;
    config.sampler.augment_between = true;
  } else {
    throw ConfigError("unknown ablation '" + name +
                      "' (expected no_augmentations, no_revin, no_sparsemax "
                      "or no_within_subject)");
  }
}

std::string effective_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;

  j["data"]["path"] = cfg.data.path;
  j["data"]["window_length"] = cfg.data.window_length;
  j["data"]["window_stride"] = cfg.data.window_stride;
  j["data"]["split_ratios"] = cfg.data.split_ratios;
  j["data"]["synthetic"] = synthetic_to_json(cfg.data.synthetic);

  j["distnet"]["embed_dim"] = cfg.distnet.embed_dim;
  j["distnet"]["kernel_size"] = cfg.distnet.kernel_size;
  j["distnet"]["dilations"] = cfg.distnet.dilations;
  j["distnet"]["normalizer"] =
      attention_normalizer_name(cfg.distnet.normalizer);
  j["distnet"]["revin"] = cfg.distnet.revin;
  j["distnet"]["revin_literal_order"] = cfg.distnet.revin_literal_order;
  j["distnet"]["eps"] = cfg.distnet.eps;
  j["distnet"]["steps"] = cfg.distnet_train.steps;
  j["distnet"]["batch_size"] = cfg.distnet_train.batch_size;
  j["distnet"]["lr"] = cfg.distnet_train.lr;

  j["augment"]["rng_seed"] = cfg.augment.rng_seed;
  j["augment"]["specs"] = json::array();
  for (const auto& s : cfg.augment.specs) {
    j["augment"]["specs"].push_back(spec_to_json(s));
  }

  j["sampler"]["candidate_count"] = cfg.sampler.candidate_count;
  j["sampler"]["within_user_count"] = cfg.sampler.within_user_count;
  j["sampler"]["include_augmented_self"] = cfg.sampler.include_augmented_self;
  j["sampler"]["augment_between"] = cfg.sampler.augment_between;

  j["encoder"]["stem_width"] = cfg.encoder.stem_width;
  j["encoder"]["stem_kernel"] = cfg.encoder.stem_kernel;
  j["encoder"]["stem_stride"] = cfg.encoder.stem_stride;
  j["encoder"]["stage_widths"] = cfg.encoder.stage_widths;
  j["encoder"]["stage_blocks"] = cfg.encoder.stage_blocks;
  j["encoder"]["stage_strides"] = cfg.encoder.stage_strides;
  j["encoder"]["block_kernel"] = cfg.encoder.block_kernel;
  j["encoder"]["embed_dim"] = cfg.encoder.embed_dim;
  j["encoder"]["norm_eps"] = cfg.encoder.norm_eps;
  j["encoder"]["steps"] = cfg.encoder_train.steps;
  j["encoder"]["batch_size"] = cfg.encoder_train.batch_size;
  j["encoder"]["lr"] = cfg.encoder_train.lr;

  j["loss"]["temperature"] = cfg.loss.temperature;
  j["loss"]["variant"] = loss_variant_name(cfg.loss.variant);
  j["loss"]["normalize_embeddings"] = cfg.loss.normalize_embeddings;

  j["eval"]["probe"] = probe_kind_name(cfg.eval.probe);
  j["eval"]["ridge_lambda"] = cfg.eval.ridge_lambda;
  j["eval"]["repeats"] = cfg.eval.repeats;
  j["eval"]["mlp_hidden"] = cfg.eval.mlp_hidden;
  j["eval"]["clf_steps"] = cfg.eval.clf_steps;
  j["eval"]["clf_lr"] = cfg.eval.clf_lr;
  j["eval"]["regression_targets"] = cfg.eval.regression_targets;
  j["eval"]["finetune"]["steps"] = cfg.eval.finetune.steps;
  j["eval"]["finetune"]["batch_size"] = cfg.eval.finetune.batch_size;
  j["eval"]["finetune"]["lr"] = cfg.eval.finetune.lr;

  j["ablations"]["no_augmentations"] = cfg.ablations.no_augmentations;
  j["ablations"]["no_revin"] = cfg.ablations.no_revin;
  j["ablations"]["no_sparsemax"] = cfg.ablations.no_sparsemax;
  j["ablations"]["no_within_subject"] = cfg.ablations.no_within_subject;

  return j.dump(2);
}

}  // namespace relcon
