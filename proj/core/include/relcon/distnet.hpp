#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "relcon/augment.hpp"
#include "relcon/checkpoint.hpp"
#include "relcon/data.hpp"
#include "relcon/tensor.hpp"

namespace relcon {

// Learnable motif-based distance: the anchor is reconstructed from the
// candidate through candidate-conditioned reversible instance normalization,
// dilated-convolution query/key/value embeddings and simplex-normalized
// cross-attention; the distance is the squared reconstruction error. Trained
// against augmented copies of the anchor, then frozen.

enum class AttentionNormalizer { kSparsemax, kSoftmax };

const char* attention_normalizer_name(AttentionNormalizer n);
AttentionNormalizer attention_normalizer_from_name(const std::string& name);

struct ConvLayer {
  Tensor kernel;  // [k, Cin, Cout]
  Tensor bias;    // [Cout]
  int dilation = 1;
};

// Stack of dilated conv layers with ReLU between layers (none after the
// last).
struct DilatedConvNet {
  std::vector<ConvLayer> layers;
};

struct DistNetHyper {
  int embed_dim = 16;            // d
  int kernel_size = 7;           // k, odd
  std::vector<int> dilations{1, 2};  // one entry per layer
  AttentionNormalizer normalizer = AttentionNormalizer::kSparsemax;
  bool revin = true;                 // candidate-conditioned normalization
  bool revin_literal_order = false;  // (out + mu) * sigma instead of out*sigma + mu
  double eps = 1e-5;                 // sigma floor

  void validate() const;
};

DistNetHyper desk_distnet_hyper();
DistNetHyper paper_distnet_hyper();  // 4 layers, k=15, d=64, dilations 1,2,4,8

struct DistanceNetParams {
  DistNetHyper hyper;
  DilatedConvNet q_net;  // anchor side
  DilatedConvNet k_net;  // candidate side
  DilatedConvNet v_net;  // candidate side
  Tensor w_o;            // [d, 3]
  Tensor b_o;            // [3]

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

DistanceNetParams init_distance_net(const DistNetHyper& hyper,
                                    std::uint64_t seed);

// Per-channel mean and (population) std over the candidate's time axis,
// std floored at eps.
struct CandidateStats {
  std::array<double, 3> mu;
  std::array<double, 3> sigma;
};

CandidateStats candidate_stats(const Window& cand, double eps);

Tensor window_to_tensor(const Window& w);  // [T, 3]

// Normalize/denormalize by candidate stats; these invert each other
// elementwise whenever sigma > eps.
Tensor revin_normalize(const Tensor& x, const CandidateStats& stats);
Tensor revin_denormalize(const Tensor& x, const CandidateStats& stats);

Tensor run_convnet(const DilatedConvNet& net, const Tensor& input);

// Q from the normalized anchor, K and V from the normalized candidate; BOTH
// are normalized by the candidate's statistics.
std::tuple<Tensor, Tensor, Tensor> embed_qkv(const Tensor& anchor,
                                             const Tensor& cand,
                                             const DistanceNetParams& params,
                                             const CandidateStats& stats);

// Attention weights over candidate timesteps for each anchor timestep
// (scaled dot-product scores through the configured simplex normalizer).
Tensor attention_weights(const Tensor& q, const Tensor& k,
                         const DistanceNetParams& params);

// Full reconstruction of the anchor from the candidate, [T, 3].
Tensor cross_attention_recon(const Tensor& anchor, const Tensor& cand,
                             const DistanceNetParams& params);

// Squared L2 reconstruction error over all T x 3 entries. Asymmetric.
Tensor distance_t(const Tensor& anchor, const Tensor& cand,
                  const DistanceNetParams& params);
double distance(const Window& anchor, const Window& cand,
                const DistanceNetParams& params);

struct DistTrainConfig {
  int steps = 2000;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct TrainLogPoint {
  int step;
  double loss;
};

// Minimizes the mean reconstruction distance with candidate := pipeline
// (anchor) over minibatches of pool draws. Returns the per-step loss curve;
// params are left trained and are not mutated by anything afterwards.
std::vector<TrainLogPoint> train_distance(DistanceNetParams& params,
                                          const WindowPool& pool,
                                          const AugmentationPipeline& pipeline,
                                          const DistTrainConfig& cfg);

void save_distnet(const std::string& path, const DistanceNetParams& params);
DistanceNetParams load_distnet(const std::string& path);

}  // namespace relcon
