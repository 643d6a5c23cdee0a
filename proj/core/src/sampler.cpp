#include "relcon/sampler.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "relcon/errors.hpp"

namespace relcon {

void SamplerConfig::validate() const {
  if (candidate_count < 1) {
    throw ConfigError("sampler: candidate_count must be >= 1");
  }
  if (within_user_count < 0 || within_user_count > candidate_count) {
    throw ConfigError(
        "sampler: within_user_count must lie in [0, candidate_count]");
  }
  const int reserved = within_user_count + (include_augmented_self ? 1 : 0);
  if (reserved > candidate_count) {
    throw ConfigError(
        "sampler: within_user_count plus the augmented-self slot exceeds "
        "candidate_count");
  }
}

CandidateSet sample_candidates(const Window& anchor,
                               const std::vector<Window>& batch,
                               const WindowPool& pool,
                               const SamplerConfig& config,
                               const AugmentationPipeline& augment,
                               std::mt19937_64& rng) {
  config.validate();
  CandidateSet set;
  set.anchor = anchor;

  // Augmented self takes one slot when enabled.
  if (config.include_augmented_self) {
    Candidate c;
    c.window = apply_pipeline(augment, anchor, rng);
    c.window.recording_id += "/aug-self";
    c.source = CandidateSource::kWithinUser;
    set.candidates.push_back(std::move(c));
  }

  // Within-user draws: distinct (recording, offset) pairs, never the anchor
  // itself. Rejection sampling keeps the draw uniform over positions.
  if (config.within_user_count > 0) {
    const std::size_t available = pool.user_positions(anchor.user_id);
    if (available < static_cast<std::size_t>(config.within_user_count) + 1) {
      throw DataError("sample_candidates: user '" + anchor.user_id +
                      "' has only " + std::to_string(available) +
                      " windows; need " +
                      std::to_string(config.within_user_count + 1) +
                      " including the anchor");
    }
    std::set<std::string> taken;
    taken.insert(anchor.identity());
    int drawn = 0;
    while (drawn < config.within_user_count) {
      Window w = pool.sample_from_user(anchor.user_id, rng);
      if (!taken.insert(w.identity()).second) continue;
      Candidate c;
      c.window = std::move(w);
      c.source = CandidateSource::kWithinUser;
      set.candidates.push_back(std::move(c));
      ++drawn;
    }
  }

  // Between-user pool: other users' batch windows, optionally together with
  // augmented copies of them.
  const int between_needed =
      config.candidate_count - static_cast<int>(set.candidates.size());
  if (between_needed > 0) {
    std::vector<const Window*> others;
    for (const auto& w : batch) {
      if (w.user_id != anchor.user_id) others.push_back(&w);
    }
    const std::size_t pool_size =
        others.size() * (config.augment_between ? 2 : 1);
    if (pool_size < static_cast<std::size_t>(between_needed)) {
      throw DataError(
          "sample_candidates: batch provides " + std::to_string(pool_size) +
          " between-user candidates for anchor '" + anchor.identity() +
          "', need " + std::to_string(between_needed));
    }
    std::vector<std::size_t> order(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int taken = 0; taken < between_needed; ++taken) {
      const std::size_t idx = order[static_cast<std::size_t>(taken)];
      const Window& src = *others[idx % others.size()];
      Candidate c;
      if (idx >= others.size()) {
        c.window = apply_pipeline(augment, src, rng);
        c.window.recording_id += "/aug";
      } else {
        c.window = src;
      }
      c.source = CandidateSource::kBetweenUser;
      set.candidates.push_back(std::move(c));
    }
  }
  return set;
}

void score_candidates(CandidateSet& set, const DistanceNetParams& frozen) {
  for (auto& c : set.candidates) {
    c.dist_to_anchor = distance(set.anchor, c.window, frozen);
  }
}

std::vector<ScoredCandidate> to_scored_candidates(
    const CandidateSet& set, const std::vector<Tensor>& embeddings) {
  if (embeddings.size() != set.candidates.size()) {
    throw std::invalid_argument(
        "to_scored_candidates: embedding count does not match candidates");
  }
  std::vector<ScoredCandidate> out;
  out.reserve(set.candidates.size());
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const auto& c = set.candidates[i];
    if (c.dist_to_anchor < 0.0) {
      throw std::invalid_argument(
          "to_scored_candidates: candidate '" + c.window.identity() +
          "' has not been scored");
    }
    ScoredCandidate sc;
    sc.window_id = c.window.identity();
    sc.embedding = embeddings[i];
    sc.dist_to_anchor = c.dist_to_anchor;
    sc.source = c.source;
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace relcon
