#include "relcon/distnet.hpp"

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

DilatedConvNet init_convnet(const DistNetHyper& hyper, std::mt19937_64& rng) {
  DilatedConvNet net;
  int cin = 3;
  for (int dilation : hyper.dilations) {
    ConvLayer layer;
    layer.kernel = he_kernel(hyper.kernel_size, cin, hyper.embed_dim, rng);
    layer.bias = Tensor::zeros({static_cast<std::size_t>(hyper.embed_dim)});
    layer.dilation = dilation;
    net.layers.push_back(std::move(layer));
    cin = hyper.embed_dim;
  }
  return net;
}

void append_net(std::vector<std::pair<std::string, Tensor>>& out,
                const std::string& prefix, const DilatedConvNet& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.emplace_back(prefix + ".layer" + std::to_string(i) + ".kernel",
                     net.layers[i].kernel);
    out.emplace_back(prefix + ".layer" + std::to_string(i) + ".bias",
                     net.layers[i].bias);
  }
}

}  // namespace

const char* attention_normalizer_name(AttentionNormalizer n) {
  return n == AttentionNormalizer::kSparsemax ? "sparsemax" : "softmax";
}

AttentionNormalizer attention_normalizer_from_name(const std::string& name) {
  if (name == "sparsemax") return AttentionNormalizer::kSparsemax;
  if (name == "softmax") return AttentionNormalizer::kSoftmax;
  throw ConfigError("unknown attention normalizer '" + name + "'");
}

void DistNetHyper::validate() const {
  if (embed_dim < 1) throw ConfigError("distnet: embed_dim must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("distnet: kernel_size must be odd and positive");
  }
  if (dilations.empty()) {
    throw ConfigError("distnet: at least one conv layer required");
  }
  for (int d : dilations) {
    if (d < 1) throw ConfigError("distnet: dilations must be >= 1");
  }
  if (!(eps > 0.0)) throw ConfigError("distnet: eps must be > 0");
}

DistNetHyper desk_distnet_hyper() {
  DistNetHyper h;
  h.embed_dim = 16;
  h.kernel_size = 7;
  h.dilations = {1, 2};
  return h;
}

DistNetHyper paper_distnet_hyper() {
  DistNetHyper h;
  h.embed_dim = 64;
  h.kernel_size = 15;
  h.dilations = {1, 2, 4, 8};
  return h;
}

std::vector<Tensor> DistanceNetParams::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> DistanceNetParams::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_net(out, "q_net", q_net);
  append_net(out, "k_net", k_net);
  append_net(out, "v_net", v_net);
  out.emplace_back("w_o", w_o);
  out.emplace_back("b_o", b_o);
  return out;
}

DistanceNetParams init_distance_net(const DistNetHyper& hyper,
                                    std::uint64_t seed) {
  hyper.validate();
  std::mt19937_64 rng(seed);
  DistanceNetParams params;
  params.hyper = hyper;
  params.q_net = init_convnet(hyper, rng);
  params.k_net = init_convnet(hyper, rng);
  params.v_net = init_convnet(hyper, rng);
  std::normal_distribution<double> dist(
      0.0, std::sqrt(1.0 / static_cast<double>(hyper.embed_dim)));
  std::vector<double> wo(static_cast<std::size_t>(hyper.embed_dim) * 3);
  for (auto& x : wo) x = dist(rng);
  params.w_o =
      Tensor({static_cast<std::size_t>(hyper.embed_dim), 3}, std::move(wo));
  params.b_o = Tensor::zeros({3});
  return params;
}

CandidateStats candidate_stats(const Window& cand, double eps) {
  if (cand.length < 2) {
    throw std::invalid_argument("candidate_stats: need at least 2 samples");
  }
  CandidateStats stats{};
  const double n = static_cast<double>(cand.length);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < cand.length; ++t) {
      mean += cand.samples[t * 3 + c];
    }
    mean /= n;
    double var = 0.0;
    for (std::size_t t = 0; t < cand.length; ++t) {
      const double d = cand.samples[t * 3 + c] - mean;
      var += d * d;
    }
    var /= n;
    stats.mu[c] = mean;
    stats.sigma[c] = std::max(std::sqrt(var), eps);
  }
  return stats;
}

Tensor window_to_tensor(const Window& w) {
  return Tensor({w.length, 3}, w.samples);
}

Tensor revin_normalize(const Tensor& x, const CandidateStats& stats) {
  Tensor mu({3}, {stats.mu[0], stats.mu[1], stats.mu[2]});
  Tensor sigma({3}, {stats.sigma[0], stats.sigma[1], stats.sigma[2]});
  return div(sub(x, mu), sigma);
}

Tensor revin_denormalize(const Tensor& x, const CandidateStats& stats) {
  Tensor mu({3}, {stats.mu[0], stats.mu[1], stats.mu[2]});
  Tensor sigma({3}, {stats.sigma[0], stats.sigma[1], stats.sigma[2]});
  return add(mul(x, sigma), mu);
}

Tensor run_convnet(const DilatedConvNet& net, const Tensor& input) {
  Tensor h = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    h = add(conv1d(h, layer.kernel, layer.dilation), layer.bias);
    if (i + 1 < net.layers.size()) h = relu(h);
  }
  return h;
}

std::tuple<Tensor, Tensor, Tensor> embed_qkv(const Tensor& anchor,
                                             const Tensor& cand,
                                             const DistanceNetParams& params,
                                             const CandidateStats& stats) {
  if (anchor.shape() != cand.shape()) {
    throw std::invalid_argument(
        "embed_qkv: anchor and candidate must share the same length");
  }
  Tensor anchor_in = anchor;
  Tensor cand_in = cand;
  if (params.hyper.revin) {
    anchor_in = revin_normalize(anchor, stats);
    cand_in = revin_normalize(cand, stats);
  }
  Tensor q = run_convnet(params.q_net, anchor_in);
  Tensor k = run_convnet(params.k_net, cand_in);
  Tensor v = run_convnet(params.v_net, cand_in);
  return {q, k, v};
}

Tensor attention_weights(const Tensor& q, const Tensor& k,
                         const DistanceNetParams& params) {
  const double scale =
      1.0 / std::sqrt(static_cast<double>(params.hyper.embed_dim));
  Tensor scores = mul(matmul(q, transpose(k)), scale);
  if (params.hyper.normalizer == AttentionNormalizer::kSparsemax) {
    return sparsemax_rows(scores);
  }
  return softmax_rows(scores, 1.0);
}

Tensor cross_attention_recon(const Tensor& anchor, const Tensor& cand,
                             const DistanceNetParams& params) {
  Window stats_window;
  stats_window.length = cand.dim(0);
  stats_window.samples = cand.values();
  const CandidateStats stats =
      params.hyper.revin ? candidate_stats(stats_window, params.hyper.eps)
                         : CandidateStats{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};

  auto [q, k, v] = embed_qkv(anchor, cand, params, stats);
  Tensor attn = attention_weights(q, k, params);
  Tensor context = matmul(attn, v);
  Tensor projected = add(matmul(context, params.w_o), params.b_o);
  if (!params.hyper.revin) return projected;
  if (params.hyper.revin_literal_order) {
    // Literal printed composition: (out + mu) * sigma.
    Tensor mu({3}, {stats.mu[0], stats.mu[1], stats.mu[2]});
    Tensor sigma({3}, {stats.sigma[0], stats.sigma[1], stats.sigma[2]});
    return mul(add(projected, mu), sigma);
  }
  return revin_denormalize(projected, stats);
}

Tensor distance_t(const Tensor& anchor, const Tensor& cand,
                  const DistanceNetParams& params) {
  Tensor recon = cross_attention_recon(anchor, cand, params);
  return sum_all(square(sub(recon, anchor)));
}

double distance(const Window& anchor, const Window& cand,
                const DistanceNetParams& params) {
  if (anchor.length != cand.length) {
    throw std::invalid_argument(
        "distance: anchor and candidate lengths differ");
  }
  const double d =
      distance_t(window_to_tensor(anchor), window_to_tensor(cand), params)
          .value();
  if (!std::isfinite(d)) {
    throw NumericalError("distance: non-finite activation for pair (" +
                         anchor.identity() + ", " + cand.identity() + ")");
  }
  return d;
}

std::vector<TrainLogPoint> train_distance(DistanceNetParams& params,
                                          const WindowPool& pool,
                                          const AugmentationPipeline& pipeline,
                                          const DistTrainConfig& cfg) {
  if (cfg.steps < 1 || cfg.batch_size < 1) {
    throw ConfigError("train_distance: steps and batch_size must be >= 1");
  }
  std::mt19937_64 draw_rng(cfg.seed);
  std::mt19937_64 aug_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  auto all_params = params.parameters();
  Adam opt(all_params, {.lr = cfg.lr});
  std::vector<TrainLogPoint> curve;
  curve.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    Tape tape;
    for (auto& p : all_params) tape.watch(p);

    std::vector<Tensor> losses;
    losses.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Window anchor = pool.sample_any(draw_rng);
      const Window cand = apply_pipeline(pipeline, anchor, aug_rng);
      losses.push_back(distance_t(window_to_tensor(anchor),
                                  window_to_tensor(cand), params));
    }
    Tensor loss = mean_all(stack_scalars(losses));
    const double loss_value = loss.value();
    if (!std::isfinite(loss_value)) {
      throw NumericalError("train_distance: loss diverged to non-finite at step " +
                           std::to_string(step));
    }
    curve.push_back({step, loss_value});

    tape.backward(loss);
    opt.step();
    opt.zero_grad();
  }
  return curve;
}

void save_distnet(const std::string& path, const DistanceNetParams& params) {
  json hyper;
  hyper["embed_dim"] = params.hyper.embed_dim;
  hyper["kernel_size"] = params.hyper.kernel_size;
  hyper["dilations"] = params.hyper.dilations;
  hyper["normalizer"] = attention_normalizer_name(params.hyper.normalizer);
  hyper["revin"] = params.hyper.revin;
  hyper["revin_literal_order"] = params.hyper.revin_literal_order;
  hyper["eps"] = params.hyper.eps;
  hyper["kind"] = "distnet";

  std::vector<CheckpointEntry> entries;
  for (const auto& [name, t] : params.named_parameters()) {
    entries.push_back({name, t});
  }
  save_checkpoint(path, hyper.dump(), entries);
}

DistanceNetParams load_distnet(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  json hyper = json::parse(ckpt.hyper_json);
  if (hyper.value("kind", "") != "distnet") {
    throw DataError("load_distnet: '" + path + "' is not a distnet checkpoint");
  }
  DistNetHyper h;
  h.embed_dim = hyper.at("embed_dim").get<int>();
  h.kernel_size = hyper.at("kernel_size").get<int>();
  h.dilations = hyper.at("dilations").get<std::vector<int>>();
  h.normalizer =
      attention_normalizer_from_name(hyper.at("normalizer").get<std::string>());
  h.revin = hyper.at("revin").get<bool>();
  h.revin_literal_order = hyper.at("revin_literal_order").get<bool>();
  h.eps = hyper.at("eps").get<double>();
  h.validate();

  // Rebuild with the right shapes, then overwrite from the manifest.
  DistanceNetParams params = init_distance_net(h, 0);
  auto named = params.named_parameters();
  if (named.size() != ckpt.entries.size()) {
    throw DataError("load_distnet: manifest has " +
                    std::to_string(ckpt.entries.size()) + " tensors, expected " +
                    std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (ckpt.entries[i].name != named[i].first) {
      throw DataError("load_distnet: unexpected tensor '" +
                      ckpt.entries[i].name + "' (wanted '" + named[i].first +
                      "')");
    }
    if (ckpt.entries[i].tensor.shape() != named[i].second.shape()) {
      throw DataError("load_distnet: shape mismatch for '" +
                      ckpt.entries[i].name + "'");
    }
    named[i].second.mutable_values() = ckpt.entries[i].tensor.values();
  }
  return params;
}

}  // namespace relcon
