#include "relcon/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

constexpr double kDistanceFloor = 1e-8;

void check_candidates(const std::vector<ScoredCandidate>& candidates,
                      const char* op) {
  for (const auto& c : candidates) {
    if (!(c.dist_to_anchor >= 0.0) || !std::isfinite(c.dist_to_anchor)) {
      throw std::invalid_argument(std::string(op) + ": candidate '" +
                                  c.window_id +
                                  "' has an invalid frozen distance");
    }
  }
}

}  // namespace

const char* loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::kRelCon: return "relcon";
    case LossVariant::kBinary: return "binary";
    case LossVariant::kLogRatio: return "log_ratio";
  }
  return "unknown";
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "relcon") return LossVariant::kRelCon;
  if (name == "binary") return LossVariant::kBinary;
  if (name == "log_ratio") return LossVariant::kLogRatio;
  throw ConfigError("unknown loss variant '" + name + "'");
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) {
    throw ConfigError("loss: temperature must be > 0");
  }
}

double similarity(std::span<const double> a, std::span<const double> b,
                  const LossConfig& config) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("similarity: embedding lengths differ (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!config.normalize_embeddings) return dot;
  const double denom = std::max(std::sqrt(na) * std::sqrt(nb), 1e-12);
  return dot / denom;
}

Tensor similarity_t(const Tensor& a, const Tensor& b,
                    const LossConfig& config) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("similarity: embedding lengths differ (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  Tensor dot = sum_all(mul(a, b));
  if (!config.normalize_embeddings) return dot;
  Tensor denom = clamp_min(mul(l2_norm(a), l2_norm(b)), 1e-12);
  return div(dot, denom);
}

Tensor nt_xent(const Tensor& anchor, const Tensor& pos,
               const std::vector<Tensor>& negs, const LossConfig& config) {
  config.validate();
  if (negs.empty()) {
    return Tensor(0.0);  // ratio of identical terms; gradient is exactly zero
  }
  const double inv_tau = 1.0 / config.temperature;
  std::vector<Tensor> scaled;
  scaled.reserve(negs.size() + 1);
  for (const auto& n : negs) {
    scaled.push_back(mul(similarity_t(anchor, n, config), inv_tau));
  }
  Tensor z_pos = mul(similarity_t(anchor, pos, config), inv_tau);
  scaled.push_back(z_pos);

  Tensor z = stack_scalars(scaled);
  // Stabilized log-sum-exp; the max shift is a constant w.r.t. gradients.
  double m = z.at(0);
  for (std::size_t i = 1; i < z.size(); ++i) m = std::max(m, z.at(i));
  Tensor lse = add(log(sum_all(exp(add(z, -m)))), m);
  return sub(lse, z_pos);
}

std::vector<std::string> negative_set(
    const std::map<std::string, double>& anchor_dists,
    const std::string& pos) {
  auto it = anchor_dists.find(pos);
  if (it == anchor_dists.end()) {
    throw std::invalid_argument("negative_set: positive '" + pos +
                                "' is not among the scored candidates");
  }
  const double d_pos = it->second;
  std::vector<std::string> out;
  for (const auto& [id, d] : anchor_dists) {
    if (d > d_pos) out.push_back(id);
  }
  return out;
}

std::vector<std::size_t> negative_set_indices(const std::vector<double>& dists,
                                              std::size_t pos_index) {
  if (pos_index >= dists.size()) {
    throw std::invalid_argument("negative_set: positive index out of range");
  }
  const double d_pos = dists[pos_index];
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < dists.size(); ++j) {
    if (dists[j] > d_pos) out.push_back(j);
  }
  return out;
}

Tensor relcon_loss(const Tensor& anchor,
                   const std::vector<ScoredCandidate>& candidates,
                   const LossConfig& config) {
  config.validate();
  if (candidates.empty()) {
    throw std::invalid_argument("relcon_loss: need at least one candidate");
  }
  check_candidates(candidates, "relcon_loss");

  std::vector<double> dists;
  dists.reserve(candidates.size());
  for (const auto& c : candidates) dists.push_back(c.dist_to_anchor);

  Tensor total(0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto neg_idx = negative_set_indices(dists, i);
    if (neg_idx.empty()) continue;  // empty set contributes exactly 0
    std::vector<Tensor> negs;
    negs.reserve(neg_idx.size());
    for (std::size_t j : neg_idx) negs.push_back(candidates[j].embedding);
    total = add(total, nt_xent(anchor, candidates[i].embedding, negs, config));
  }
  return total;
}

Tensor binary_contrastive_loss(const Tensor& anchor,
                               const std::vector<ScoredCandidate>& candidates,
                               const LossConfig& config) {
  config.validate();
  if (candidates.size() < 2) {
    throw std::invalid_argument(
        "binary_contrastive_loss: need at least two candidates");
  }
  check_candidates(candidates, "binary_contrastive_loss");

  std::size_t pos = 0;  // argmin distance, ties to the lowest index
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].dist_to_anchor < candidates[pos].dist_to_anchor) pos = i;
  }
  std::vector<Tensor> negs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i != pos) negs.push_back(candidates[i].embedding);
  }
  return nt_xent(anchor, candidates[pos].embedding, negs, config);
}

Tensor log_ratio_metric_loss(const Tensor& anchor,
                             const std::vector<ScoredCandidate>& candidates,
                             const LossConfig& config) {
  config.validate();
  if (candidates.empty()) {
    throw std::invalid_argument(
        "log_ratio_metric_loss: need at least one candidate");
  }
  check_candidates(candidates, "log_ratio_metric_loss");

  // Embedding distances, floored so the logs stay defined.
  std::vector<Tensor> log_emb_dist;
  log_emb_dist.reserve(candidates.size());
  for (const auto& c : candidates) {
    Tensor d = clamp_min(l2_norm(sub(anchor, c.embedding)), kDistanceFloor);
    log_emb_dist.push_back(log(d));
  }

  Tensor total(0.0);
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    for (std::size_t n = 0; n < candidates.size(); ++n) {
      if (!(candidates[p].dist_to_anchor < candidates[n].dist_to_anchor)) {
        continue;
      }
      const double log_d_ratio =
          std::log(std::max(candidates[p].dist_to_anchor, kDistanceFloor)) -
          std::log(std::max(candidates[n].dist_to_anchor, kDistanceFloor));
      Tensor diff = add(sub(log_emb_dist[p], log_emb_dist[n]), -log_d_ratio);
      total = add(total, square(diff));
    }
  }
  return total;
}

Tensor candidate_loss(const Tensor& anchor,
                      const std::vector<ScoredCandidate>& candidates,
                      const LossConfig& config) {
  switch (config.variant) {
    case LossVariant::kRelCon:
      return relcon_loss(anchor, candidates, config);
    case LossVariant::kBinary:
      return binary_contrastive_loss(anchor, candidates, config);
    case LossVariant::kLogRatio:
      return log_ratio_metric_loss(anchor, candidates, config);
  }
  throw ConfigError("candidate_loss: unknown variant");
}

}  // namespace relcon
