#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "relcon/augment.hpp"
#include "relcon/data.hpp"
#include "relcon/distnet.hpp"
#include "relcon/loss.hpp"

namespace relcon {

// Candidate pool assembly: within-user subsequences across time plus
// between-user batch members, scored by the frozen distance network.

struct SamplerConfig {
  int candidate_count = 8;
  int within_user_count = 4;
  bool include_augmented_self = false;
  // SimCLR-style ablation: the between-user pool also carries augmented
  // copies of the other batch members.
  bool augment_between = false;

  void validate() const;
};

struct Candidate {
  Window window;
  CandidateSource source = CandidateSource::kWithinUser;
  double dist_to_anchor = -1.0;  // filled by score_candidates
};

struct CandidateSet {
  Window anchor;
  std::vector<Candidate> candidates;
};

// Draws config.within_user_count distinct within-user windows (excluding the
// anchor's own (recording, offset)) and fills the rest from other users in
// the batch. When include_augmented_self is set, one slot is an augmented
// copy of the anchor. Deterministic under the caller's rng.
CandidateSet sample_candidates(const Window& anchor,
                               const std::vector<Window>& batch,
                               const WindowPool& pool,
                               const SamplerConfig& config,
                               const AugmentationPipeline& augment,
                               std::mt19937_64& rng);

// Fills dist_to_anchor for every candidate with the frozen distance.
void score_candidates(CandidateSet& set, const DistanceNetParams& frozen);

// Loss-level view of a scored set given embeddings aligned by index
// (embeddings[0] pairs with set.candidates[0], ...).
std::vector<ScoredCandidate> to_scored_candidates(
    const CandidateSet& set, const std::vector<Tensor>& embeddings);

}  // namespace relcon
