#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relcon/encoder.hpp"
#include "relcon/tensor.hpp"

namespace relcon {

// Downstream evaluation: frozen-embedding probes (ridge regression, linear
// and MLP classifiers), full fine-tuning, workout-level majority voting and
// the metric suite. Frozen probes never touch encoder parameters.

enum class ProbeKind { kLinearReg, kLinearClf, kMlpClf, kFinetune };

const char* probe_kind_name(ProbeKind k);
ProbeKind probe_kind_from_name(const std::string& name);

struct ProbeConfig {
  double ridge_lambda = 1e-3;
  int clf_steps = 400;
  double clf_lr = 0.05;
  int mlp_hidden = 64;
  std::uint64_t seed = 0;
};

// Closed-form ridge regression (normal equations, bias unpenalized).
struct RegressionProbe {
  std::vector<double> weights;
  double bias = 0.0;

  double predict(std::span<const double> embedding) const;
};

RegressionProbe fit_linear_regression(const Tensor& embeddings,
                                      const std::vector<double>& targets,
                                      double ridge_lambda);

// Softmax cross-entropy classifier on frozen embeddings; mlp variants use
// one ReLU hidden layer.
struct ClassifierProbe {
  ProbeKind kind = ProbeKind::kLinearClf;
  int n_classes = 0;
  Tensor w_hidden, b_hidden;  // undefined for the linear probe
  Tensor w_out, b_out;

  std::vector<double> scores(std::span<const double> embedding) const;
  int predict(std::span<const double> embedding) const;
};

ClassifierProbe fit_classifier(const Tensor& embeddings,
                               const std::vector<int>& labels, ProbeKind kind,
                               const ProbeConfig& config);

struct FinetuneConfig {
  int steps = 200;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int n_classes = 0;  // inferred from labels when 0
};

struct FinetuneResult {
  EncoderParams encoder;
  ClassifierProbe head;
  std::vector<TrainLogPoint> curve;
};

// Joint training of the encoder and a linear head from the given
// initialization. Zero steps returns the encoder bitwise unchanged.
FinetuneResult finetune(const EncoderParams& init,
                        const std::vector<Window>& labeled_windows,
                        const FinetuneConfig& config);

// Modal class id; ties break to the smallest id.
int majority_vote(const std::vector<int>& window_predictions);

struct MetricsReport {
  std::map<std::string, double> scalars;

  struct PerClass {
    int class_id = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    std::size_t support = 0;
  };
  std::vector<PerClass> per_class;

  struct PerUser {
    std::string user_id;
    double mean_pred = 0.0;
    double mean_target = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
  };
  std::vector<PerUser> per_user;

  std::vector<std::string> warnings;

  std::string to_json() const;  // deterministic field ordering
  std::string csv_header() const;
  std::string csv_row() const;
};

// Per-user errors first: MSE/MAE are means over users, SDSE/SDAE sample
// standard deviations over users, and the Pearson correlation relates
// per-user mean predictions to per-user mean targets.
MetricsReport regression_metrics(const std::vector<double>& preds,
                                 const std::vector<double>& targets,
                                 const std::vector<std::string>& user_ids);

// Accuracy, macro F1, Cohen's kappa, one-vs-rest macro AUC. Classes absent
// from the labels are excluded from macro averages with a warning.
MetricsReport classification_metrics(
    const std::vector<int>& preds,
    const std::vector<std::vector<double>>& scores,
    const std::vector<int>& labels);

}  // namespace relcon
