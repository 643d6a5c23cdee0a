#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "relcon/tensor.hpp"

namespace relcon {

// The relative contrastive loss and its two ablation variants. Each
// candidate takes a turn as the positive; its negatives are exactly the
// candidates whose frozen distance to the anchor is strictly larger, so
// farther candidates appear in more negative sets.

enum class CandidateSource { kWithinUser, kBetweenUser };

enum class LossVariant { kRelCon, kBinary, kLogRatio };

const char* loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name);

struct LossConfig {
  double temperature = 1.0;
  LossVariant variant = LossVariant::kRelCon;
  bool normalize_embeddings = false;  // cosine instead of raw inner product

  void validate() const;
};

struct ScoredCandidate {
  std::string window_id;
  Tensor embedding;
  double dist_to_anchor = 0.0;  // frozen distance-net value
  CandidateSource source = CandidateSource::kWithinUser;
};

double similarity(std::span<const double> a, std::span<const double> b,
                  const LossConfig& config);
Tensor similarity_t(const Tensor& a, const Tensor& b,
                    const LossConfig& config);

// -log( e^{s_pos/tau} / (sum_neg e^{s_neg/tau} + e^{s_pos/tau}) ).
// An empty negative set gives exactly 0.
Tensor nt_xent(const Tensor& anchor, const Tensor& pos,
               const std::vector<Tensor>& negs, const LossConfig& config);

// Candidates whose distance STRICTLY exceeds the positive's; ties are
// excluded on both sides.
std::vector<std::string> negative_set(
    const std::map<std::string, double>& anchor_dists, const std::string& pos);
std::vector<std::size_t> negative_set_indices(const std::vector<double>& dists,
                                              std::size_t pos_index);

Tensor relcon_loss(const Tensor& anchor,
                   const std::vector<ScoredCandidate>& candidates,
                   const LossConfig& config);

// Single NT-Xent with pos = argmin distance (ties broken by lowest index)
// and every other candidate as a negative. Requires >= 2 candidates.
Tensor binary_contrastive_loss(const Tensor& anchor,
                               const std::vector<ScoredCandidate>& candidates,
                               const LossConfig& config);

// Sum over ordered pairs (p, n) with d_ap < d_an of
// (log(|Ea-Ep|/|Ea-En|) - log(d_ap/d_an))^2; both distance kinds are
// floored at 1e-8 inside the logs.
Tensor log_ratio_metric_loss(const Tensor& anchor,
                             const std::vector<ScoredCandidate>& candidates,
                             const LossConfig& config);

// Dispatch on config.variant.
Tensor candidate_loss(const Tensor& anchor,
                      const std::vector<ScoredCandidate>& candidates,
                      const LossConfig& config);

}  // namespace relcon
