#pragma once

#include <string>
#include <vector>

#include "relcon/config.hpp"

namespace relcon {

// Stage runners behind the CLI. Each writes its artifacts plus
// effective_config.json and run_record.json into `out_dir`; reruns
// overwrite whole files and never append (records are immutable once a
// stage completes). Wall-clock timings go into run_record.json only, so
// metrics.json stays byte-reproducible.

// Writes dataset.json + per-recording CSVs generated from
// config.data.synthetic into out_dir.
void run_gen_synth(const RunConfig& config, const std::string& out_dir);

// Trains the distance network on the train-split users of
// config.data.path; writes distnet.ckpt and loss.csv. Returns the
// checkpoint path.
std::string run_train_distance(const RunConfig& config,
                               const std::string& out_dir);

// RelCon pre-training: per batch, anchors are drawn from the train split,
// candidate sets are assembled and scored with the frozen distance network,
// and the configured loss variant updates the encoder. Writes encoder.ckpt
// and loss.csv. Returns the checkpoint path.
std::string run_train_encoder(const RunConfig& config,
                              const std::string& distnet_ckpt,
                              const std::string& out_dir);

// Embeds every evaluation window; writes embeddings.csv with columns
// id,e0..e{d-1}.
void run_embed(const RunConfig& config, const std::string& encoder_ckpt,
               const std::string& out_dir);

// Frozen-embedding probes: classification on val-split users (train) and
// test-split users (eval) at the subsequence and workout level, plus ridge
// regression per configured target. Repeated eval.repeats times; writes
// metrics.json with mean/std per metric.
void run_probe(const RunConfig& config, const std::string& encoder_ckpt,
               const std::string& out_dir);

// Joint fine-tuning from the checkpoint; writes encoder_finetuned.ckpt and
// metrics.json.
void run_finetune(const RunConfig& config, const std::string& encoder_ckpt,
                  const std::string& out_dir);

// Joins the metrics of several runs into one comparison table with
// percentage deltas against the named baseline run (default: the first).
// Writes report.csv into out_dir and returns the CSV text.
std::string run_report(const std::vector<std::string>& run_dirs,
                       const std::string& baseline_name,
                       const std::string& out_dir);

// Dataset loading shared by the stages: applies the window-length cutoff
// and falls back to a seeded user split when the manifest carries none.
Dataset load_stage_dataset(const RunConfig& config);

}  // namespace relcon
