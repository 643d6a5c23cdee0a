#include "relcon/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::array<std::array<double, 3>, 3> rodrigues(
    const std::array<double, 3>& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double kx = axis[0], ky = axis[1], kz = axis[2];
  return {{{c + kx * kx * (1 - c), kx * ky * (1 - c) - kz * s,
            kx * kz * (1 - c) + ky * s},
           {ky * kx * (1 - c) + kz * s, c + ky * ky * (1 - c),
            ky * kz * (1 - c) - kx * s},
           {kz * kx * (1 - c) - ky * s, kz * ky * (1 - c) + kx * s,
            c + kz * kz * (1 - c)}}};
}

double window_std(const Window& w) {
  double mean = 0.0;
  for (double x : w.samples) mean += x;
  mean /= static_cast<double>(w.samples.size());
  double var = 0.0;
  for (double x : w.samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.samples.size());
  return std::sqrt(var);
}

std::array<double, 3> random_unit_axis(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (true) {
    std::array<double, 3> a{gauss(rng), gauss(rng), gauss(rng)};
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    if (n > 1e-8) {
      for (auto& x : a) x /= n;
      return a;
    }
  }
}

}  // namespace

const char* augment_kind_name(AugmentKind k) {
  switch (k) {
    case AugmentKind::kRotation3d: return "rotation3d";
    case AugmentKind::kJitter: return "jitter";
    case AugmentKind::kScale: return "scale";
    case AugmentKind::kInvert: return "invert";
    case AugmentKind::kTimeReverse: return "time_reverse";
    case AugmentKind::kChannelShuffle: return "channel_shuffle";
    case AugmentKind::kTimeWarp: return "time_warp";
  }
  return "unknown";
}

AugmentKind augment_kind_from_name(const std::string& name) {
  for (AugmentKind k :
       {AugmentKind::kRotation3d, AugmentKind::kJitter, AugmentKind::kScale,
        AugmentKind::kInvert, AugmentKind::kTimeReverse,
        AugmentKind::kChannelShuffle, AugmentKind::kTimeWarp}) {
    if (name == augment_kind_name(k)) return k;
  }
  throw ConfigError("unknown augmentation kind '" + name + "'");
}

void AugmentationSpec::validate() const {
  if (probability < 0.0 || probability > 1.0) {
    throw ConfigError("augmentation probability must lie in [0,1]");
  }
  switch (kind) {
    case AugmentKind::kRotation3d: {
      if (angle_max < angle_min) {
        throw ConfigError("rotation3d: angle_max < angle_min");
      }
      break;
    }
    case AugmentKind::kJitter:
      if (jitter_sigma < 0.0) throw ConfigError("jitter: sigma must be >= 0");
      break;
    case AugmentKind::kScale:
      if (!(scale_min > 0.0) || scale_max < scale_min) {
        throw ConfigError("scale: range must be positive with min <= max");
      }
      break;
    case AugmentKind::kChannelShuffle: {
      std::array<bool, 3> seen{false, false, false};
      for (int p : channel_perm) {
        if (p < 0 || p > 2 || seen[static_cast<std::size_t>(p)]) {
          throw ConfigError("channel_shuffle: invalid permutation");
        }
        seen[static_cast<std::size_t>(p)] = true;
      }
      break;
    }
    case AugmentKind::kTimeWarp:
      if (warp_knots < 2) throw ConfigError("time_warp: knots must be >= 2");
      if (!(warp_max_speed_ratio > 1.0)) {
        throw ConfigError("time_warp: max_speed_ratio must be > 1");
      }
      break;
    default:
      break;
  }
}

Window rotation3d(const Window& w, const std::array<double, 3>& axis,
                  double angle_rad) {
  const double norm =
      std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (std::fabs(norm - 1.0) > 1e-9) {
    throw std::invalid_argument("rotation3d: axis must have unit norm");
  }
  const auto R = rodrigues(axis, angle_rad);
  Window out = w;
  for (std::size_t t = 0; t < w.length; ++t) {
    const double x = w.samples[t * 3], y = w.samples[t * 3 + 1],
                 z = w.samples[t * 3 + 2];
    out.samples[t * 3] = R[0][0] * x + R[0][1] * y + R[0][2] * z;
    out.samples[t * 3 + 1] = R[1][0] * x + R[1][1] * y + R[1][2] * z;
    out.samples[t * 3 + 2] = R[2][0] * x + R[2][1] * y + R[2][2] * z;
  }
  return out;
}

Window jitter(const Window& w, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw ConfigError("jitter: sigma must be >= 0");
  if (sigma == 0.0) return w;
  Window out = w;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& x : out.samples) x += noise(rng);
  return out;
}

Window scale_amplitude(const Window& w, double factor) {
  if (!(factor > 0.0)) {
    throw ConfigError("scale: factor must be positive");
  }
  Window out = w;
  for (auto& x : out.samples) x *= factor;
  return out;
}

Window invert(const Window& w) {
  Window out = w;
  for (auto& x : out.samples) x = -x;
  return out;
}

Window time_reverse(const Window& w) {
  Window out = w;
  for (std::size_t t = 0; t < w.length; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.samples[t * 3 + c] = w.samples[(w.length - 1 - t) * 3 + c];
    }
  }
  return out;
}

Window channel_shuffle(const Window& w, const std::array<int, 3>& perm) {
  std::array<bool, 3> seen{false, false, false};
  for (int p : perm) {
    if (p < 0 || p > 2 || seen[static_cast<std::size_t>(p)]) {
      throw ConfigError("channel_shuffle: invalid permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  Window out = w;
  for (std::size_t t = 0; t < w.length; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.samples[t * 3 + c] =
          w.samples[t * 3 + static_cast<std::size_t>(perm[c])];
    }
  }
  return out;
}

Window time_warp(const Window& w, int knots, double max_speed_ratio,
                 std::mt19937_64& rng) {
  if (knots < 2) throw ConfigError("time_warp: knots must be >= 2");
  if (!(max_speed_ratio > 1.0)) {
    throw ConfigError("time_warp: max_speed_ratio must be > 1");
  }
  const std::size_t T = w.length;
  // Piecewise-linear local speed between knots, integrated into a monotone
  // warp and renormalized so the warp maps [0,T-1] onto itself.
  std::uniform_real_distribution<double> speed(1.0 / max_speed_ratio,
                                               max_speed_ratio);
  std::vector<double> knot_speed(static_cast<std::size_t>(knots));
  for (auto& s : knot_speed) s = speed(rng);

  std::vector<double> warped(T, 0.0);
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double pos = static_cast<double>(t) / static_cast<double>(T - 1) *
                       static_cast<double>(knots - 1);
    const std::size_t k0 =
        std::min(static_cast<std::size_t>(pos), static_cast<std::size_t>(knots - 2));
    const double frac = pos - static_cast<double>(k0);
    const double sp = knot_speed[k0] * (1.0 - frac) + knot_speed[k0 + 1] * frac;
    warped[t] = acc;
    acc += sp;
  }
  const double scale = static_cast<double>(T - 1) / warped.back();
  for (auto& x : warped) x *= scale;

  Window out = w;
  for (std::size_t t = 0; t < T; ++t) {
    const double src = warped[t];
    const std::size_t i0 =
        std::min(static_cast<std::size_t>(src), T - 2);
    const double frac = src - static_cast<double>(i0);
    for (std::size_t c = 0; c < 3; ++c) {
      out.samples[t * 3 + c] = w.samples[i0 * 3 + c] * (1.0 - frac) +
                               w.samples[(i0 + 1) * 3 + c] * frac;
    }
  }
  return out;
}

Window apply_pipeline(const AugmentationPipeline& pipeline, const Window& w,
                      std::mt19937_64& rng) {
  Window out = w;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (const auto& spec : pipeline.specs) {
    spec.validate();
    if (coin(rng) >= spec.probability) continue;
    switch (spec.kind) {
      case AugmentKind::kRotation3d: {
        std::array<double, 3> axis = spec.axis;
        if (spec.random_axis) axis = random_unit_axis(rng);
        std::uniform_real_distribution<double> ang(spec.angle_min,
                                                   spec.angle_max);
        out = rotation3d(out, axis, ang(rng));
        break;
      }
      case AugmentKind::kJitter: {
        double sigma = spec.jitter_sigma;
        if (spec.sigma_is_relative) sigma *= window_std(out);
        out = jitter(out, sigma, rng);
        break;
      }
      case AugmentKind::kScale: {
        std::uniform_real_distribution<double> f(spec.scale_min,
                                                 spec.scale_max);
        out = scale_amplitude(out, f(rng));
        break;
      }
      case AugmentKind::kInvert:
        out = invert(out);
        break;
      case AugmentKind::kTimeReverse:
        out = time_reverse(out);
        break;
      case AugmentKind::kChannelShuffle: {
        std::array<int, 3> perm = spec.channel_perm;
        if (spec.random_perm) {
          perm = {0, 1, 2};
          std::shuffle(perm.begin(), perm.end(), rng);
        }
        out = channel_shuffle(out, perm);
        break;
      }
      case AugmentKind::kTimeWarp:
        out = time_warp(out, spec.warp_knots, spec.warp_max_speed_ratio, rng);
        break;
    }
  }
  return out;
}

Window apply_pipeline(const AugmentationPipeline& pipeline, const Window& w) {
  std::mt19937_64 rng(pipeline.rng_seed);
  return apply_pipeline(pipeline, w, rng);
}

AugmentationPipeline default_distance_pipeline(std::uint64_t seed) {
  AugmentationPipeline p;
  p.rng_seed = seed;

  AugmentationSpec rot;
  rot.kind = AugmentKind::kRotation3d;
  rot.probability = 1.0;
  rot.random_axis = true;
  rot.angle_min = 0.0;
  rot.angle_max = 2.0 * kPi;
  p.specs.push_back(rot);

  AugmentationSpec jit;
  jit.kind = AugmentKind::kJitter;
  jit.probability = 0.8;
  jit.jitter_sigma = 0.05;
  jit.sigma_is_relative = true;
  p.specs.push_back(jit);

  AugmentationSpec sc;
  sc.kind = AugmentKind::kScale;
  sc.probability = 0.5;
  sc.scale_min = 0.8;
  sc.scale_max = 1.2;
  p.specs.push_back(sc);

  return p;
}

}  // namespace relcon
