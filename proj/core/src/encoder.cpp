#include "relcon/encoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

using nlohmann::json;

Tensor he_kernel(int k, int cin, int cout, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(
      0.0, std::sqrt(2.0 / (static_cast<double>(k) * cin)));
  std::vector<double> v(static_cast<std::size_t>(k) * cin * cout);
  for (auto& x : v) x = dist(rng);
  return Tensor({static_cast<std::size_t>(k), static_cast<std::size_t>(cin),
                 static_cast<std::size_t>(cout)},
                std::move(v));
}

ConvLayer make_conv(int k, int cin, int cout, std::mt19937_64& rng) {
  ConvLayer layer;
  layer.kernel = he_kernel(k, cin, cout, rng);
  layer.bias = Tensor::zeros({static_cast<std::size_t>(cout)});
  return layer;
}

void append_conv(std::vector<std::pair<std::string, Tensor>>& out,
                 const std::string& prefix, const ConvLayer& layer) {
  out.emplace_back(prefix + ".kernel", layer.kernel);
  out.emplace_back(prefix + ".bias", layer.bias);
}

}  // namespace

void EncoderHyper::validate() const {
  if (stem_width < 1 || stem_kernel < 1 || stem_kernel % 2 == 0) {
    throw ConfigError("encoder: stem kernel must be odd and positive");
  }
  if (stem_stride < 1) throw ConfigError("encoder: stem stride must be >= 1");
  if (stage_widths.empty() || stage_widths.size() != stage_blocks.size() ||
      stage_widths.size() != stage_strides.size()) {
    throw ConfigError(
        "encoder: stage_widths, stage_blocks and stage_strides must have the "
        "same nonzero length");
  }
  for (int w : stage_widths) {
    if (w < 1) throw ConfigError("encoder: stage widths must be >= 1");
  }
  for (int b : stage_blocks) {
    if (b < 1) throw ConfigError("encoder: stage blocks must be >= 1");
  }
  for (int s : stage_strides) {
    if (s < 1) throw ConfigError("encoder: stage strides must be >= 1");
  }
  if (block_kernel < 1 || block_kernel % 2 == 0) {
    throw ConfigError("encoder: block kernel must be odd and positive");
  }
  if (embed_dim != stage_widths.back()) {
    throw ConfigError(
        "encoder: embed_dim must equal the final stage width (global average "
        "pooling output)");
  }
  if (!(norm_eps > 0.0)) throw ConfigError("encoder: norm_eps must be > 0");
}

std::size_t EncoderHyper::min_input_length() const {
  std::size_t product = static_cast<std::size_t>(stem_stride);
  for (int s : stage_strides) product *= static_cast<std::size_t>(s);
  return product;
}

EncoderHyper desk_encoder_hyper() { return EncoderHyper{}; }

EncoderHyper paper_encoder_hyper() {
  EncoderHyper h;
  h.stem_width = 64;
  h.stem_kernel = 7;
  h.stem_stride = 2;
  h.stage_widths = {64, 128, 256, 256};
  h.stage_blocks = {3, 4, 6, 3};
  h.stage_strides = {1, 2, 2, 2};
  h.block_kernel = 3;
  h.embed_dim = 256;
  return h;
}

std::vector<Tensor> EncoderParams::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_conv(out, "stem", stem);
  out.emplace_back("stem.gamma", stem_gamma);
  out.emplace_back("stem.beta", stem_beta);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    const auto& blk = blocks[i];
    append_conv(out, prefix + ".conv1", blk.conv1);
    append_conv(out, prefix + ".conv2", blk.conv2);
    if (blk.proj) append_conv(out, prefix + ".proj", *blk.proj);
    out.emplace_back(prefix + ".in1.gamma", blk.in1_gamma);
    out.emplace_back(prefix + ".in1.beta", blk.in1_beta);
    out.emplace_back(prefix + ".in2.gamma", blk.in2_gamma);
    out.emplace_back(prefix + ".in2.beta", blk.in2_beta);
  }
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.size();
  return n;
}

EncoderParams init_encoder(const EncoderHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  std::mt19937_64 rng(seed);
  EncoderParams params;
  params.hyper = hyper;
  params.stem = make_conv(hyper.stem_kernel, 3, hyper.stem_width, rng);
  params.stem_gamma =
      Tensor::full({static_cast<std::size_t>(hyper.stem_width)}, 1.0);
  params.stem_beta = Tensor::zeros({static_cast<std::size_t>(hyper.stem_width)});

  int cin = hyper.stem_width;
  for (std::size_t stage = 0; stage < hyper.stage_widths.size(); ++stage) {
    const int width = hyper.stage_widths[stage];
    for (int b = 0; b < hyper.stage_blocks[stage]; ++b) {
      ResBlockParams blk;
      blk.stride = (b == 0) ? hyper.stage_strides[stage] : 1;
      blk.conv1 = make_conv(hyper.block_kernel, cin, width, rng);
      blk.conv2 = make_conv(hyper.block_kernel, width, width, rng);
      if (blk.stride != 1 || cin != width) {
        blk.proj = make_conv(1, cin, width, rng);
      }
      blk.in1_gamma = Tensor::full({static_cast<std::size_t>(width)}, 1.0);
      blk.in1_beta = Tensor::zeros({static_cast<std::size_t>(width)});
      blk.in2_gamma = Tensor::full({static_cast<std::size_t>(width)}, 1.0);
      blk.in2_beta = Tensor::zeros({static_cast<std::size_t>(width)});
      params.blocks.push_back(std::move(blk));
      cin = width;
    }
  }
  return params;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps) {
  Tensor mu = mean(x, 0);  // per-channel over time
  Tensor centered = sub(x, mu);
  Tensor var = mean(square(centered), 0);
  Tensor denom = sqrt(add(var, eps));
  return add(mul(div(centered, denom), gamma), beta);
}

namespace {

Tensor run_block(const Tensor& x, const ResBlockParams& blk, double eps) {
  Tensor main = add(conv1d(x, blk.conv1.kernel, 1, blk.stride), blk.conv1.bias);
  main = relu(instance_norm(main, blk.in1_gamma, blk.in1_beta, eps));
  main = add(conv1d(main, blk.conv2.kernel, 1, 1), blk.conv2.bias);
  main = instance_norm(main, blk.in2_gamma, blk.in2_beta, eps);

  Tensor skip = x;
  if (blk.proj) {
    skip = add(conv1d(x, blk.proj->kernel, 1, blk.stride), blk.proj->bias);
  }
  return relu(add(main, skip));
}

}  // namespace

Tensor encode_t(const Tensor& window, const EncoderParams& params) {
  if (window.ndim() != 2 || window.dim(1) != 3) {
    throw std::invalid_argument("encode: window must be [T,3]");
  }
  const std::size_t min_T = params.hyper.min_input_length();
  if (window.dim(0) < min_T) {
    throw std::invalid_argument("encode: window length " +
                                std::to_string(window.dim(0)) +
                                " below the minimum receptive length " +
                                std::to_string(min_T));
  }
  Tensor h = add(
      conv1d(window, params.stem.kernel, 1, params.hyper.stem_stride),
      params.stem.bias);
  h = relu(instance_norm(h, params.stem_gamma, params.stem_beta,
                         params.hyper.norm_eps));
  for (const auto& blk : params.blocks) {
    h = run_block(h, blk, params.hyper.norm_eps);
  }
  return mean(h, 0);  // global average pooling over time
}

std::vector<double> encode(const Window& w, const EncoderParams& params) {
  return encode_t(window_to_tensor(w), params).values();
}

Tensor encode_batch(const std::vector<Window>& windows,
                    const EncoderParams& params) {
  if (windows.empty()) {
    throw std::invalid_argument("encode_batch: empty batch");
  }
  const std::size_t T = windows.front().length;
  for (const auto& w : windows) {
    if (w.length != T) {
      throw std::invalid_argument("encode_batch: ragged batch (window '" +
                                  w.identity() + "' has different length)");
    }
  }
  const std::size_t d = static_cast<std::size_t>(params.hyper.embed_dim);
  std::vector<double> out(windows.size() * d);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto row = encode(windows[i], params);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return Tensor({windows.size(), d}, std::move(out));
}

void save_encoder(const std::string& path, const EncoderParams& params) {
  json hyper;
  hyper["kind"] = "encoder";
  hyper["stem_width"] = params.hyper.stem_width;
  hyper["stem_kernel"] = params.hyper.stem_kernel;
  hyper["stem_stride"] = params.hyper.stem_stride;
  hyper["stage_widths"] = params.hyper.stage_widths;
  hyper["stage_blocks"] = params.hyper.stage_blocks;
  hyper["stage_strides"] = params.hyper.stage_strides;
  hyper["block_kernel"] = params.hyper.block_kernel;
  hyper["embed_dim"] = params.hyper.embed_dim;
  hyper["norm_eps"] = params.hyper.norm_eps;

  std::vector<CheckpointEntry> entries;
  for (const auto& [name, t] : params.named_parameters()) {
    entries.push_back({name, t});
  }
  save_checkpoint(path, hyper.dump(), entries);
}

EncoderParams load_encoder(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  json hyper = json::parse(ckpt.hyper_json);
  if (hyper.value("kind", "") != "encoder") {
    throw DataError("load_encoder: '" + path + "' is not an encoder checkpoint");
  }
  EncoderHyper h;
  h.stem_width = hyper.at("stem_width").get<int>();
  h.stem_kernel = hyper.at("stem_kernel").get<int>();
  h.stem_stride = hyper.at("stem_stride").get<int>();
  h.stage_widths = hyper.at("stage_widths").get<std::vector<int>>();
  h.stage_blocks = hyper.at("stage_blocks").get<std::vector<int>>();
  h.stage_strides = hyper.at("stage_strides").get<std::vector<int>>();
  h.block_kernel = hyper.at("block_kernel").get<int>();
  h.embed_dim = hyper.at("embed_dim").get<int>();
  h.norm_eps = hyper.at("norm_eps").get<double>();
  h.validate();

  EncoderParams params = init_encoder(h, 0);
  auto named = params.named_parameters();
  if (named.size() != ckpt.entries.size()) {
    throw DataError("load_encoder: manifest size mismatch");
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (ckpt.entries[i].name != named[i].first ||
        ckpt.entries[i].tensor.shape() != named[i].second.shape()) {
      throw DataError("load_encoder: manifest entry '" + ckpt.entries[i].name +
                      "' does not match the architecture");
    }
    named[i].second.mutable_values() = ckpt.entries[i].tensor.values();
  }
  return params;
}

}  // namespace relcon
