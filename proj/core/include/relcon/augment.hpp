#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "relcon/data.hpp"

namespace relcon {

// Semantics-preserving accelerometry transformations. All of them map a
// T x 3 window to a T x 3 window and leave provenance/labels untouched.

enum class AugmentKind {
  kRotation3d,
  kJitter,
  kScale,
  kInvert,
  kTimeReverse,
  kChannelShuffle,
  kTimeWarp,
};

const char* augment_kind_name(AugmentKind k);
AugmentKind augment_kind_from_name(const std::string& name);

struct AugmentationSpec {
  AugmentKind kind = AugmentKind::kRotation3d;
  double probability = 1.0;

  // rotation3d
  bool random_axis = true;
  std::array<double, 3> axis{0.0, 0.0, 1.0};
  double angle_min = 0.0;
  double angle_max = 2.0 * 3.14159265358979323846;

  // jitter: sigma relative to the per-window sample std when
  // sigma_is_relative is set.
  double jitter_sigma = 0.05;
  bool sigma_is_relative = true;

  // scale
  double scale_min = 0.8;
  double scale_max = 1.2;

  // channel_shuffle
  bool random_perm = true;
  std::array<int, 3> channel_perm{1, 2, 0};

  // time_warp
  int warp_knots = 4;
  double warp_max_speed_ratio = 1.5;

  void validate() const;  // throws ConfigError on bad parameters
};

struct AugmentationPipeline {
  std::vector<AugmentationSpec> specs;  // applied in list order
  std::uint64_t rng_seed = 0;

  bool is_identity() const { return specs.empty(); }
};

// Deterministic single transformations.
Window rotation3d(const Window& w, const std::array<double, 3>& axis,
                  double angle_rad);
Window jitter(const Window& w, double sigma, std::mt19937_64& rng);
Window scale_amplitude(const Window& w, double factor);
Window invert(const Window& w);
Window time_reverse(const Window& w);
Window channel_shuffle(const Window& w, const std::array<int, 3>& perm);
Window time_warp(const Window& w, int knots, double max_speed_ratio,
                 std::mt19937_64& rng);

// Applies each spec independently with its probability, drawing from `rng`.
Window apply_pipeline(const AugmentationPipeline& pipeline, const Window& w,
                      std::mt19937_64& rng);

// Convenience: a fresh stream seeded from pipeline.rng_seed, so the same
// (seed, input, pipeline) always yields the same output.
Window apply_pipeline(const AugmentationPipeline& pipeline, const Window& w);

// rotation3d (p=1), relative jitter (p=0.8), amplitude scale (p=0.5); the
// remaining kinds ship but default off.
AugmentationPipeline default_distance_pipeline(std::uint64_t seed);

}  // namespace relcon
