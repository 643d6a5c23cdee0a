#include "relcon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "relcon/errors.hpp"

namespace relcon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef RELCON_SOURCE_REV
#define RELCON_SOURCE_REV "unknown"
#endif

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void write_loss_csv(const fs::path& path,
                    const std::vector<TrainLogPoint>& curve) {
  std::string text = "step,loss\n";
  for (const auto& p : curve) {
    text += std::to_string(p.step) + "," + g17(p.loss) + "\n";
  }
  write_text(path, text);
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_run_record(const fs::path& out_dir, const std::string& stage,
                      const RunConfig& config, const json& inputs,
                      const json& outputs, double seconds) {
  json record;
  record["stage"] = stage;
  record["source_revision"] = RELCON_SOURCE_REV;
  record["config"] = json::parse(effective_config_json(config));
  record["inputs"] = inputs;
  record["outputs"] = outputs;
  record["wall_seconds"] = seconds;
  write_text(out_dir / "run_record.json", record.dump(2) + "\n");
}

void write_effective_config(const fs::path& out_dir, const RunConfig& config) {
  write_text(out_dir / "effective_config.json",
             effective_config_json(config) + "\n");
}

std::vector<Window> windows_for_users(const Dataset& ds,
                                      const std::vector<std::string>& users,
                                      std::size_t T, std::size_t stride) {
  std::set<std::string> allowed(users.begin(), users.end());
  std::vector<Window> out;
  for (const auto& rec : ds.recordings) {
    if (allowed.count(rec.user_id) == 0) continue;
    if (rec.length() < T) continue;
    auto ws = make_windows(rec, T, stride);
    out.insert(out.end(), std::make_move_iterator(ws.begin()),
               std::make_move_iterator(ws.end()));
  }
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (static_cast<double>(values.size()) - 1.0));
  }
  return out;
}

json aggregate_scalars(const std::vector<MetricsReport>& reports) {
  json out;
  if (reports.empty()) return out;
  for (const auto& [name, first_value] : reports.front().scalars) {
    std::vector<double> values;
    values.reserve(reports.size());
    for (const auto& r : reports) values.push_back(r.scalars.at(name));
    const MeanStd ms = mean_std(values);
    out[name] = {{"mean", ms.mean}, {"std", ms.std}};
  }
  return out;
}

// RelCon pre-training loop over the train split.
EncoderParams train_encoder_relcon(const RunConfig& cfg, const Dataset& ds,
                                   const DistanceNetParams& frozen,
                                   std::vector<TrainLogPoint>& curve) {
  const auto train_users = ds.splits.users_in(Split::kTrain);
  if (train_users.empty()) {
    throw DataError("train-encoder: the train split has no users");
  }
  WindowPool pool(ds, cfg.data.window_length, train_users);

  EncoderParams enc = init_encoder(cfg.encoder, cfg.seed ^ 0x517cc1b727220a95ull);
  auto params = enc.parameters();
  Adam opt(params, {.lr = cfg.encoder_train.lr});
  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dull);

  const int B = cfg.encoder_train.batch_size;
  const int between_needed =
      cfg.sampler.candidate_count - cfg.sampler.within_user_count -
      (cfg.sampler.include_augmented_self ? 1 : 0);
  const int between_pool_factor = cfg.sampler.augment_between ? 2 : 1;

  curve.clear();
  curve.reserve(static_cast<std::size_t>(cfg.encoder_train.steps));
  for (int step = 0; step < cfg.encoder_train.steps; ++step) {
    // Draw anchors until every anchor sees enough other-user batch windows.
    std::vector<Window> anchors;
    for (int attempt = 0;; ++attempt) {
      anchors.clear();
      for (int b = 0; b < B; ++b) anchors.push_back(pool.sample_any(rng));
      bool ok = true;
      for (const auto& a : anchors) {
        int others = 0;
        for (const auto& w : anchors) {
          if (w.user_id != a.user_id) ++others;
        }
        if (others * between_pool_factor < between_needed) {
          ok = false;
          break;
        }
      }
      if (ok) break;
      if (attempt >= 100) {
        throw DataError(
            "train-encoder: cannot assemble a batch with enough distinct "
            "users for between-user sampling");
      }
    }

    std::vector<CandidateSet> sets;
    sets.reserve(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      CandidateSet set = sample_candidates(anchors[i], anchors, pool,
                                           cfg.sampler, cfg.augment, rng);
      // Augmented windows are fresh draws; make their cache ids unique per
      // anchor and slot.
      for (std::size_t c = 0; c < set.candidates.size(); ++c) {
        auto& w = set.candidates[c].window;
        if (w.recording_id.find("/aug") != std::string::npos) {
          w.recording_id += "#" + std::to_string(i) + "." + std::to_string(c);
        }
      }
      score_candidates(set, frozen);
      sets.push_back(std::move(set));
    }

    Tape tape;
    for (auto& p : params) tape.watch(p);
    std::map<std::string, Tensor> embedding_cache;
    auto embed_of = [&](const Window& w) {
      auto it = embedding_cache.find(w.identity());
      if (it != embedding_cache.end()) return it->second;
      Tensor e = encode_t(window_to_tensor(w), enc);
      embedding_cache.emplace(w.identity(), e);
      return e;
    };

    std::vector<Tensor> anchor_losses;
    anchor_losses.reserve(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      Tensor anchor_emb = embed_of(anchors[i]);
      std::vector<Tensor> cand_embs;
      cand_embs.reserve(sets[i].candidates.size());
      for (const auto& c : sets[i].candidates) {
        cand_embs.push_back(embed_of(c.window));
      }
      anchor_losses.push_back(candidate_loss(
          anchor_emb, to_scored_candidates(sets[i], cand_embs), cfg.loss));
    }
    Tensor loss = mean_all(stack_scalars(anchor_losses));
    const double lv = loss.value();
    if (!std::isfinite(lv)) {
      throw NumericalError("train-encoder: loss diverged to non-finite at step " +
                           std::to_string(step));
    }
    curve.push_back({step, lv});
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
  }
  return enc;
}

struct ProbeData {
  std::vector<Window> train_windows;
  std::vector<Window> test_windows;
  Tensor train_embeddings;
  Tensor test_embeddings;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

ProbeData embed_probe_splits(const RunConfig& cfg, const Dataset& ds,
                             const EncoderParams& enc) {
  ProbeData data;
  data.train_windows =
      windows_for_users(ds, ds.splits.users_in(Split::kVal),
                        cfg.data.window_length, cfg.data.window_stride);
  data.test_windows =
      windows_for_users(ds, ds.splits.users_in(Split::kTest),
                        cfg.data.window_length, cfg.data.window_stride);
  if (data.train_windows.empty() || data.test_windows.empty()) {
    throw DataError(
        "probe: need windows in both the val split (probe training) and the "
        "test split (evaluation)");
  }
  data.train_embeddings = encode_batch(data.train_windows, enc);
  data.test_embeddings = encode_batch(data.test_windows, enc);
  for (const auto& w : data.train_windows) data.train_labels.push_back(w.label);
  for (const auto& w : data.test_windows) data.test_labels.push_back(w.label);
  return data;
}

std::vector<double> embedding_row(const Tensor& matrix, std::size_t row) {
  const std::size_t d = matrix.dim(1);
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = matrix.at(row * d + j);
  return out;
}

json classification_json(const RunConfig& cfg, const ProbeData& data) {
  std::vector<MetricsReport> subseq_reports, workout_reports;
  for (int rep = 0; rep < cfg.eval.repeats; ++rep) {
    ProbeConfig pcfg;
    pcfg.ridge_lambda = cfg.eval.ridge_lambda;
    pcfg.clf_steps = cfg.eval.clf_steps;
    pcfg.clf_lr = cfg.eval.clf_lr;
    pcfg.mlp_hidden = cfg.eval.mlp_hidden;
    pcfg.seed = cfg.seed + static_cast<std::uint64_t>(rep) * 1000003ull;
    const ProbeKind kind = cfg.eval.probe == ProbeKind::kMlpClf
                               ? ProbeKind::kMlpClf
                               : ProbeKind::kLinearClf;
    ClassifierProbe probe =
        fit_classifier(data.train_embeddings, data.train_labels, kind, pcfg);

    std::vector<int> preds(data.test_windows.size());
    std::vector<std::vector<double>> scores(data.test_windows.size());
    for (std::size_t i = 0; i < data.test_windows.size(); ++i) {
      const auto row = embedding_row(data.test_embeddings, i);
      scores[i] = probe.scores(row);
      preds[i] = static_cast<int>(
          std::max_element(scores[i].begin(), scores[i].end()) -
          scores[i].begin());
    }
    subseq_reports.push_back(
        classification_metrics(preds, scores, data.test_labels));

    // Workout level: majority vote per recording; scores averaged.
    std::map<std::string, std::vector<std::size_t>> by_recording;
    for (std::size_t i = 0; i < data.test_windows.size(); ++i) {
      by_recording[data.test_windows[i].recording_id].push_back(i);
    }
    std::vector<int> rec_preds, rec_labels;
    std::vector<std::vector<double>> rec_scores;
    for (const auto& [rec_id, idx] : by_recording) {
      std::vector<int> votes;
      std::vector<double> mean_scores(scores.front().size(), 0.0);
      for (std::size_t i : idx) {
        votes.push_back(preds[i]);
        for (std::size_t c = 0; c < mean_scores.size(); ++c) {
          mean_scores[c] += scores[i][c];
        }
      }
      for (auto& s : mean_scores) s /= static_cast<double>(idx.size());
      rec_preds.push_back(majority_vote(votes));
      rec_scores.push_back(std::move(mean_scores));
      rec_labels.push_back(data.test_labels[idx.front()]);
    }
    workout_reports.push_back(
        classification_metrics(rec_preds, rec_scores, rec_labels));
  }

  json out;
  out["subsequence"] = aggregate_scalars(subseq_reports);
  out["workout"] = aggregate_scalars(workout_reports);
  out["subsequence_detail"] = json::parse(subseq_reports.front().to_json());
  out["workout_detail"] = json::parse(workout_reports.front().to_json());
  return out;
}

json regression_json(const RunConfig& cfg, const ProbeData& data) {
  json out;
  for (const auto& target : cfg.eval.regression_targets) {
    std::vector<double> train_y, test_y;
    bool available = true;
    for (const auto& w : data.train_windows) {
      auto it = w.targets.find(target);
      if (it == w.targets.end()) {
        available = false;
        break;
      }
      train_y.push_back(it->second);
    }
    if (available) {
      for (const auto& w : data.test_windows) {
        auto it = w.targets.find(target);
        if (it == w.targets.end()) {
          available = false;
          break;
        }
        test_y.push_back(it->second);
      }
    }
    if (!available) {
      out[target] = {{"skipped", "target missing from dataset"}};
      continue;
    }
    RegressionProbe probe = fit_linear_regression(
        data.train_embeddings, train_y, cfg.eval.ridge_lambda);
    std::vector<double> preds(data.test_windows.size());
    std::vector<std::string> users(data.test_windows.size());
    for (std::size_t i = 0; i < data.test_windows.size(); ++i) {
      preds[i] = probe.predict(embedding_row(data.test_embeddings, i));
      users[i] = data.test_windows[i].user_id;
    }
    MetricsReport report = regression_metrics(preds, test_y, users);
    // The closed-form probe is deterministic, so repeats are identical.
    json agg;
    for (const auto& [name, value] : report.scalars) {
      agg[name] = {{"mean", value}, {"std", 0.0}};
    }
    out[target] = agg;
    out[target + "_detail"] = json::parse(report.to_json());
  }
  return out;
}

json probe_metrics_json(const RunConfig& cfg, const ProbeData& data) {
  json metrics;
  metrics["classification"] = classification_json(cfg, data);
  metrics["regression"] = regression_json(cfg, data);
  metrics["repeats"] = cfg.eval.repeats;
  metrics["n_probe_train_windows"] = data.train_windows.size();
  metrics["n_probe_test_windows"] = data.test_windows.size();
  return metrics;
}

}  // namespace

Dataset load_stage_dataset(const RunConfig& config) {
  if (config.data.path.empty()) {
    throw ConfigError("config: data.path is not set");
  }
  LoadReport report;
  Dataset ds =
      load_csv_dataset(config.data.path, config.data.window_length, &report);
  if (ds.recordings.empty()) {
    throw DataError("dataset at '" + config.data.path +
                    "' has no recording of at least " +
                    std::to_string(config.data.window_length) + " samples");
  }
  if (ds.splits.by_user.empty()) {
    ds.splits = split_by_user(ds, config.data.split_ratios,
                              config.seed ^ 0xa5a5a5a5ull);
  }
  return ds;
}

void run_gen_synth(const RunConfig& config, const std::string& out_dir) {
  StageTimer timer;
  Dataset ds = generate_synthetic(config.data.synthetic);
  save_csv_dataset(ds, out_dir);
  write_effective_config(out_dir, config);
  json outputs;
  outputs["dataset"] = out_dir;
  outputs["n_recordings"] = ds.recordings.size();
  outputs["n_users"] = config.data.synthetic.n_users;
  write_run_record(out_dir, "gen-synth", config, json::object(), outputs,
                   timer.seconds());
}

std::string run_train_distance(const RunConfig& config,
                               const std::string& out_dir) {
  StageTimer timer;
  Dataset ds = load_stage_dataset(config);
  const auto train_users = ds.splits.users_in(Split::kTrain);
  if (train_users.empty()) {
    throw DataError("train-distance: the train split has no users");
  }
  WindowPool pool(ds, config.data.window_length, train_users);

  DistanceNetParams params =
      init_distance_net(config.distnet, config.seed ^ 0x9e3779b97f4a7c15ull);
  AugmentationPipeline pipeline = config.augment;
  pipeline.rng_seed = pipeline.rng_seed == 0 ? config.seed : pipeline.rng_seed;

  DistTrainConfig train_cfg;
  train_cfg.steps = config.distnet_train.steps;
  train_cfg.batch_size = config.distnet_train.batch_size;
  train_cfg.lr = config.distnet_train.lr;
  train_cfg.seed = config.seed;
  auto curve = train_distance(params, pool, pipeline, train_cfg);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::string ckpt = (dir / "distnet.ckpt").string();
  save_distnet(ckpt, params);
  write_loss_csv(dir / "loss.csv", curve);
  write_effective_config(dir, config);
  json outputs;
  outputs["checkpoint"] = ckpt;
  outputs["loss_csv"] = (dir / "loss.csv").string();
  outputs["final_loss"] = curve.empty() ? 0.0 : curve.back().loss;
  write_run_record(dir, "train-distance", config,
                   json{{"dataset", config.data.path}}, outputs,
                   timer.seconds());
  return ckpt;
}

std::string run_train_encoder(const RunConfig& config,
                              const std::string& distnet_ckpt,
                              const std::string& out_dir) {
  StageTimer timer;
  Dataset ds = load_stage_dataset(config);
  DistanceNetParams frozen = load_distnet(distnet_ckpt);

  std::vector<TrainLogPoint> curve;
  EncoderParams enc = train_encoder_relcon(config, ds, frozen, curve);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::string ckpt = (dir / "encoder.ckpt").string();
  save_encoder(ckpt, enc);
  write_loss_csv(dir / "loss.csv", curve);
  write_effective_config(dir, config);
  json outputs;
  outputs["checkpoint"] = ckpt;
  outputs["loss_csv"] = (dir / "loss.csv").string();
  outputs["final_loss"] = curve.empty() ? 0.0 : curve.back().loss;
  write_run_record(dir, "train-encoder", config,
                   json{{"dataset", config.data.path},
                        {"distnet_checkpoint", distnet_ckpt}},
                   outputs, timer.seconds());
  return ckpt;
}

void run_embed(const RunConfig& config, const std::string& encoder_ckpt,
               const std::string& out_dir) {
  StageTimer timer;
  Dataset ds = load_stage_dataset(config);
  EncoderParams enc = load_encoder(encoder_ckpt);

  auto windows =
      make_windows(ds, config.data.window_length, config.data.window_stride);
  const std::size_t d = static_cast<std::size_t>(enc.hyper.embed_dim);
  std::string csv = "id";
  for (std::size_t j = 0; j < d; ++j) csv += ",e" + std::to_string(j);
  csv += "\n";
  for (const auto& w : windows) {
    const auto emb = encode(w, enc);
    csv += w.identity();
    for (double v : emb) csv += "," + g17(v);
    csv += "\n";
  }
  const fs::path dir(out_dir);
  write_text(dir / "embeddings.csv", csv);
  write_effective_config(dir, config);
  json outputs;
  outputs["embeddings_csv"] = (dir / "embeddings.csv").string();
  outputs["rows"] = windows.size();
  outputs["embed_dim"] = d;
  write_run_record(dir, "embed", config,
                   json{{"dataset", config.data.path},
                        {"encoder_checkpoint", encoder_ckpt}},
                   outputs, timer.seconds());
}

void run_probe(const RunConfig& config, const std::string& encoder_ckpt,
               const std::string& out_dir) {
  StageTimer timer;
  Dataset ds = load_stage_dataset(config);
  EncoderParams enc = load_encoder(encoder_ckpt);
  if (enc.hyper.embed_dim != config.encoder.embed_dim) {
    throw ConfigError("probe: checkpoint embed_dim " +
                      std::to_string(enc.hyper.embed_dim) +
                      " does not match the configured embed_dim " +
                      std::to_string(config.encoder.embed_dim));
  }

  ProbeData data = embed_probe_splits(config, ds, enc);
  json metrics = probe_metrics_json(config, data);

  const fs::path dir(out_dir);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_effective_config(dir, config);
  json outputs;
  outputs["metrics"] = (dir / "metrics.json").string();
  write_run_record(dir, "probe", config,
                   json{{"dataset", config.data.path},
                        {"encoder_checkpoint", encoder_ckpt}},
                   outputs, timer.seconds());
}

void run_finetune(const RunConfig& config, const std::string& encoder_ckpt,
                  const std::string& out_dir) {
  StageTimer timer;
  Dataset ds = load_stage_dataset(config);
  EncoderParams enc = load_encoder(encoder_ckpt);
  if (enc.hyper.embed_dim != config.encoder.embed_dim) {
    throw ConfigError("finetune: checkpoint embed_dim mismatch");
  }

  auto train_windows =
      windows_for_users(ds, ds.splits.users_in(Split::kVal),
                        config.data.window_length, config.data.window_stride);
  auto test_windows =
      windows_for_users(ds, ds.splits.users_in(Split::kTest),
                        config.data.window_length, config.data.window_stride);
  if (train_windows.empty() || test_windows.empty()) {
    throw DataError("finetune: need labeled windows in the val and test splits");
  }

  FinetuneConfig fcfg;
  fcfg.steps = config.eval.finetune.steps;
  fcfg.batch_size = config.eval.finetune.batch_size;
  fcfg.lr = config.eval.finetune.lr;
  fcfg.seed = config.seed ^ 0x6a09e667f3bcc908ull;
  FinetuneResult result = finetune(enc, train_windows, fcfg);

  std::vector<int> preds, labels;
  std::vector<std::vector<double>> scores;
  for (const auto& w : test_windows) {
    const auto emb = encode(w, result.encoder);
    scores.push_back(result.head.scores(emb));
    preds.push_back(static_cast<int>(
        std::max_element(scores.back().begin(), scores.back().end()) -
        scores.back().begin()));
    labels.push_back(w.label);
  }
  MetricsReport report = classification_metrics(preds, scores, labels);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::string ckpt = (dir / "encoder_finetuned.ckpt").string();
  save_encoder(ckpt, result.encoder);
  write_loss_csv(dir / "loss.csv", result.curve);
  json metrics;
  metrics["finetuned"] = json::parse(report.to_json());
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_effective_config(dir, config);
  json outputs;
  outputs["checkpoint"] = ckpt;
  outputs["metrics"] = (dir / "metrics.json").string();
  write_run_record(dir, "finetune", config,
                   json{{"dataset", config.data.path},
                        {"encoder_checkpoint", encoder_ckpt}},
                   outputs, timer.seconds());
}

std::string run_report(const std::vector<std::string>& run_dirs,
                       const std::string& baseline_name,
                       const std::string& out_dir) {
  if (run_dirs.empty()) throw ConfigError("report: no run directories given");

  struct RunMetrics {
    std::string name;
    std::map<std::string, double> values;
  };
  const std::vector<std::pair<std::string, std::string>> columns = {
      {"stride_velocity_corr", "/regression/stride_velocity/pearson_corr/mean"},
      {"double_support_time_corr",
       "/regression/double_support_time/pearson_corr/mean"},
      {"subseq_f1", "/classification/subsequence/f1_macro/mean"},
      {"subseq_acc", "/classification/subsequence/accuracy/mean"},
      {"workout_f1", "/classification/workout/f1_macro/mean"},
      {"workout_acc", "/classification/workout/accuracy/mean"},
  };

  std::vector<RunMetrics> runs;
  for (const auto& dir : run_dirs) {
    const fs::path metrics_path = fs::path(dir) / "metrics.json";
    std::ifstream in(metrics_path);
    if (!in) {
      throw DataError("report: missing " + metrics_path.string());
    }
    json metrics;
    try {
      in >> metrics;
    } catch (const json::parse_error& e) {
      throw DataError("report: malformed " + metrics_path.string() + ": " +
                      e.what());
    }
    RunMetrics rm;
    rm.name = fs::path(dir).filename().string();
    if (rm.name.empty()) rm.name = dir;
    for (const auto& [col, pointer] : columns) {
      const json* node = metrics.contains(json::json_pointer(pointer))
                             ? &metrics.at(json::json_pointer(pointer))
                             : nullptr;
      if (node && node->is_number()) rm.values[col] = node->get<double>();
    }
    runs.push_back(std::move(rm));
  }

  std::size_t baseline_index = 0;
  if (!baseline_name.empty()) {
    bool found = false;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].name == baseline_name) {
        baseline_index = i;
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError("report: baseline '" + baseline_name +
                        "' is not among the given runs");
    }
  }
  const RunMetrics& baseline = runs[baseline_index];

  std::string csv = "run";
  for (const auto& [col, pointer] : columns) {
    csv += "," + col + "," + col + "_delta_pct";
  }
  csv += "\n";
  for (const auto& run : runs) {
    csv += run.name;
    for (const auto& [col, pointer] : columns) {
      auto it = run.values.find(col);
      auto bit = baseline.values.find(col);
      if (it == run.values.end() || bit == baseline.values.end()) {
        csv += ",,";
        continue;
      }
      const double v = it->second;
      double delta = 0.0;
      if (&run != &baseline) {
        const double denom = std::fabs(bit->second);
        delta = denom > 0 ? (v - bit->second) / denom * 100.0 : 0.0;
      }
      csv += "," + g17(v) + "," + g17(delta);
    }
    csv += "\n";
  }

  write_text(fs::path(out_dir) / "report.csv", csv);
  return csv;
}

}  // namespace relcon
