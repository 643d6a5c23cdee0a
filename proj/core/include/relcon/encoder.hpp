#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relcon/data.hpp"
#include "relcon/distnet.hpp"
#include "relcon/tensor.hpp"

namespace relcon {

// Representation encoder: 1-D residual conv stages over T x 3 windows with
// per-example instance normalization, ending in global average pooling to a
// fixed-size embedding. Instance norm keeps every row of a batch independent
// of the others.

struct EncoderHyper {
  int stem_width = 16;
  int stem_kernel = 7;
  int stem_stride = 1;
  std::vector<int> stage_widths{16, 32, 64};
  std::vector<int> stage_blocks{2, 2, 2};
  std::vector<int> stage_strides{2, 2, 2};
  int block_kernel = 3;
  int embed_dim = 64;  // must equal stage_widths.back()
  double norm_eps = 1e-5;

  void validate() const;
  std::size_t min_input_length() const;  // product of all strides
};

EncoderHyper desk_encoder_hyper();
EncoderHyper paper_encoder_hyper();  // ResNet-34-like: (3,4,6,3) blocks

struct ResBlockParams {
  ConvLayer conv1;  // stride applied here
  ConvLayer conv2;
  std::optional<ConvLayer> proj;  // 1x1 when shape changes
  Tensor in1_gamma, in1_beta;
  Tensor in2_gamma, in2_beta;
  int stride = 1;
};

struct EncoderParams {
  EncoderHyper hyper;
  ConvLayer stem;
  Tensor stem_gamma, stem_beta;
  std::vector<ResBlockParams> blocks;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::size_t parameter_count() const;
};

EncoderParams init_encoder(const EncoderHyper& hyper, std::uint64_t seed);

// Normalizes each channel over time, then applies the learnable affine.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps);

Tensor encode_t(const Tensor& window, const EncoderParams& params);  // [d]
std::vector<double> encode(const Window& w, const EncoderParams& params);

// Row i is encode(windows[i]) bitwise; requires a uniform T across the batch.
Tensor encode_batch(const std::vector<Window>& windows,
                    const EncoderParams& params);

void save_encoder(const std::string& path, const EncoderParams& params);
EncoderParams load_encoder(const std::string& path);

}  // namespace relcon
