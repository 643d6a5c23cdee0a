#include "relcon/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

using nlohmann::json;

// Cholesky solve of A x = b for symmetric positive-definite A (row-major
// n x n). Returns false when A is not positive definite.
bool cholesky_solve(std::vector<double> a, std::vector<double> b,
                    std::size_t n, std::vector<double>& x) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (sum <= 0.0) return false;
        a[i * n + j] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  // Forward then backward substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
    b[i] = sum / a[i * n + i];
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * x[k];
    x[ii] = sum / a[ii * n + ii];
  }
  return true;
}

// Row-wise stabilized log-sum-exp, [B,C] -> [B].
Tensor lse_rows(const Tensor& logits) {
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  std::vector<double> m(B, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      m[i] = std::max(m[i], logits.at(i * C + j));
    }
  }
  Tensor m_col({B, 1}, m);
  Tensor e = exp(sub(logits, m_col));
  return add(log(sum(e, 1)), Tensor({B}, m));
}

Tensor cross_entropy(const Tensor& logits, const Tensor& onehot) {
  Tensor picked = sum(mul(logits, onehot), 1);  // [B]
  return mean_all(sub(lse_rows(logits), picked));
}

Tensor onehot_matrix(const std::vector<int>& labels, int n_classes) {
  std::vector<double> y(labels.size() * static_cast<std::size_t>(n_classes),
                        0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i * static_cast<std::size_t>(n_classes) +
      static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return Tensor({labels.size(), static_cast<std::size_t>(n_classes)},
                std::move(y));
}

int count_classes(const std::vector<int>& labels, const char* op) {
  std::set<int> distinct;
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) {
      throw std::invalid_argument(std::string(op) + ": negative class id");
    }
    distinct.insert(l);
    max_label = std::max(max_label, l);
  }
  if (distinct.size() < 2) {
    throw std::invalid_argument(std::string(op) +
                                ": need at least two distinct classes");
  }
  return max_label + 1;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return Tensor({rows, cols}, std::move(v));
}

std::vector<double> softmax_scores(const std::vector<double>& logits) {
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (auto& x : out) x /= sum;
  return out;
}

// Rank-based one-vs-rest AUC with average ranks for ties; equivalent to the
// trapezoidal ROC area and exactly invariant under monotone transforms.
double binary_auc(const std::vector<double>& scores,
                  const std::vector<bool>& positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::vector<double> rank(scores.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) /
                                2.0 +
                            1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (positive[k]) {
      rank_sum_pos += rank[k];
      ++n_pos;
    }
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (rank_sum_pos -
          static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) /
              2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double denom =
      std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  if (denom == 0.0) return 0.0;
  return std::clamp((n * sxy - sx * sy) / denom, -1.0, 1.0);
}

}  // namespace

const char* probe_kind_name(ProbeKind k) {
  switch (k) {
    case ProbeKind::kLinearReg: return "linear_reg";
    case ProbeKind::kLinearClf: return "linear_clf";
    case ProbeKind::kMlpClf: return "mlp_clf";
    case ProbeKind::kFinetune: return "finetune";
  }
  return "unknown";
}

ProbeKind probe_kind_from_name(const std::string& name) {
  for (ProbeKind k : {ProbeKind::kLinearReg, ProbeKind::kLinearClf,
                      ProbeKind::kMlpClf, ProbeKind::kFinetune}) {
    if (name == probe_kind_name(k)) return k;
  }
  throw ConfigError("unknown probe kind '" + name + "'");
}

double RegressionProbe::predict(std::span<const double> embedding) const {
  if (embedding.size() != weights.size()) {
    throw std::invalid_argument(
        "RegressionProbe: embedding dimension mismatch (" +
        std::to_string(embedding.size()) + " vs " +
        std::to_string(weights.size()) + ")");
  }
  double out = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out += weights[i] * embedding[i];
  }
  return out;
}

RegressionProbe fit_linear_regression(const Tensor& embeddings,
                                      const std::vector<double>& targets,
                                      double ridge_lambda) {
  if (embeddings.ndim() != 2) {
    throw std::invalid_argument("fit_linear_regression: embeddings must be 2-D");
  }
  const std::size_t B = embeddings.dim(0), d = embeddings.dim(1);
  if (targets.size() != B) {
    throw std::invalid_argument(
        "fit_linear_regression: target count does not match rows");
  }
  if (ridge_lambda < 0.0) {
    throw ConfigError("fit_linear_regression: ridge_lambda must be >= 0");
  }

  // Augmented system with an unpenalized bias column.
  const std::size_t n = d + 1;
  std::vector<double> xtx(n * n, 0.0);
  std::vector<double> xty(n, 0.0);
  const double* X = embeddings.values().data();
  for (std::size_t r = 0; r < B; ++r) {
    const double* row = X + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        xtx[i * n + j] += row[i] * row[j];
      }
      xtx[d * n + i] += row[i];  // bias cross terms
      xty[i] += row[i] * targets[r];
    }
    xty[d] += targets[r];
  }
  xtx[d * n + d] = static_cast<double>(B);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) xtx[i * n + j] = xtx[j * n + i];
  }
  for (std::size_t i = 0; i < d; ++i) xtx[i * n + i] += ridge_lambda;

  std::vector<double> solution;
  if (!cholesky_solve(std::move(xtx), std::move(xty), n, solution)) {
    throw ConfigError(
        "fit_linear_regression: singular normal equations; set ridge_lambda "
        "> 0");
  }
  RegressionProbe probe;
  probe.weights.assign(solution.begin(), solution.begin() + static_cast<std::ptrdiff_t>(d));
  probe.bias = solution[d];
  return probe;
}

std::vector<double> ClassifierProbe::scores(
    std::span<const double> embedding) const {
  const std::size_t d = static_cast<std::size_t>(
      kind == ProbeKind::kMlpClf ? w_hidden.dim(0) : w_out.dim(0));
  if (embedding.size() != d) {
    throw std::invalid_argument(
        "ClassifierProbe: embedding dimension mismatch (" +
        std::to_string(embedding.size()) + " vs " + std::to_string(d) + ")");
  }
  std::vector<double> h(embedding.begin(), embedding.end());
  if (kind == ProbeKind::kMlpClf) {
    const std::size_t H = w_hidden.dim(1);
    std::vector<double> hidden(H, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < H; ++j) {
        hidden[j] += h[i] * w_hidden.at(i * H + j);
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      hidden[j] = std::max(hidden[j] + b_hidden.at(j), 0.0);
    }
    h = std::move(hidden);
  }
  const std::size_t C = w_out.dim(1);
  std::vector<double> logits(C, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      logits[j] += h[i] * w_out.at(i * C + j);
    }
  }
  for (std::size_t j = 0; j < C; ++j) logits[j] += b_out.at(j);
  return softmax_scores(logits);
}

int ClassifierProbe::predict(std::span<const double> embedding) const {
  const auto s = scores(embedding);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

ClassifierProbe fit_classifier(const Tensor& embeddings,
                               const std::vector<int>& labels, ProbeKind kind,
                               const ProbeConfig& config) {
  if (kind != ProbeKind::kLinearClf && kind != ProbeKind::kMlpClf) {
    throw ConfigError("fit_classifier: kind must be linear_clf or mlp_clf");
  }
  if (embeddings.ndim() != 2 || embeddings.dim(0) != labels.size()) {
    throw std::invalid_argument(
        "fit_classifier: embeddings and labels disagree");
  }
  const int n_classes = count_classes(labels, "fit_classifier");
  const std::size_t d = embeddings.dim(1);

  std::mt19937_64 rng(config.seed);
  ClassifierProbe probe;
  probe.kind = kind;
  probe.n_classes = n_classes;

  std::vector<Tensor> params;
  if (kind == ProbeKind::kMlpClf) {
    const std::size_t H = static_cast<std::size_t>(config.mlp_hidden);
    probe.w_hidden = random_matrix(d, H, std::sqrt(2.0 / static_cast<double>(d)), rng);
    probe.b_hidden = Tensor::zeros({H});
    probe.w_out = random_matrix(H, static_cast<std::size_t>(n_classes),
                                std::sqrt(1.0 / static_cast<double>(H)), rng);
    probe.b_out = Tensor::zeros({static_cast<std::size_t>(n_classes)});
    params = {probe.w_hidden, probe.b_hidden, probe.w_out, probe.b_out};
  } else {
    probe.w_out = random_matrix(d, static_cast<std::size_t>(n_classes),
                                std::sqrt(1.0 / static_cast<double>(d)), rng);
    probe.b_out = Tensor::zeros({static_cast<std::size_t>(n_classes)});
    params = {probe.w_out, probe.b_out};
  }

  Tensor onehot = onehot_matrix(labels, n_classes);
  Adam opt(params, {.lr = config.clf_lr});
  for (int step = 0; step < config.clf_steps; ++step) {
    Tape tape;
    for (auto& p : params) tape.watch(p);
    Tensor h = embeddings;
    if (kind == ProbeKind::kMlpClf) {
      h = relu(add(matmul(h, probe.w_hidden), probe.b_hidden));
    }
    Tensor logits = add(matmul(h, probe.w_out), probe.b_out);
    Tensor loss = cross_entropy(logits, onehot);
    if (!std::isfinite(loss.value())) {
      throw NumericalError("fit_classifier: loss diverged at step " +
                           std::to_string(step));
    }
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
  }
  return probe;
}

FinetuneResult finetune(const EncoderParams& init,
                        const std::vector<Window>& labeled_windows,
                        const FinetuneConfig& config) {
  if (labeled_windows.empty()) {
    throw std::invalid_argument("finetune: no labeled windows");
  }
  std::vector<int> labels;
  labels.reserve(labeled_windows.size());
  for (const auto& w : labeled_windows) labels.push_back(w.label);
  const int n_classes = config.n_classes > 0
                            ? config.n_classes
                            : count_classes(labels, "finetune");

  // Deep-copy the encoder so the initialization stays untouched.
  const std::string tmp =
      "/tmp/relcon_finetune_init_" + std::to_string(config.seed) + ".ckpt";
  save_encoder(tmp, init);
  FinetuneResult result{load_encoder(tmp), {}, {}};
  std::remove(tmp.c_str());

  const std::size_t d = static_cast<std::size_t>(init.hyper.embed_dim);
  std::mt19937_64 rng(config.seed);
  result.head.kind = ProbeKind::kLinearClf;
  result.head.n_classes = n_classes;
  result.head.w_out = random_matrix(d, static_cast<std::size_t>(n_classes),
                                    std::sqrt(1.0 / static_cast<double>(d)),
                                    rng);
  result.head.b_out = Tensor::zeros({static_cast<std::size_t>(n_classes)});

  std::vector<Tensor> params = result.encoder.parameters();
  params.push_back(result.head.w_out);
  params.push_back(result.head.b_out);
  Adam opt(params, {.lr = config.lr});

  std::uniform_int_distribution<std::size_t> pick(0, labeled_windows.size() - 1);
  for (int step = 0; step < config.steps; ++step) {
    Tape tape;
    for (auto& p : params) tape.watch(p);

    std::vector<Tensor> terms;
    for (int b = 0; b < config.batch_size; ++b) {
      const std::size_t idx = pick(rng);
      const Window& w = labeled_windows[idx];
      Tensor emb = encode_t(window_to_tensor(w), result.encoder);
      Tensor logits = add(
          matmul(reshape(emb, {1, d}), result.head.w_out), result.head.b_out);
      std::vector<int> one_label{w.label};
      Tensor onehot = onehot_matrix(one_label, n_classes);
      terms.push_back(cross_entropy(logits, onehot));
    }
    Tensor loss = mean_all(stack_scalars(terms));
    const double lv = loss.value();
    if (!std::isfinite(lv)) {
      throw NumericalError("finetune: loss diverged at step " +
                           std::to_string(step));
    }
    result.curve.push_back({step, lv});
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
  }
  return result;
}

int majority_vote(const std::vector<int>& window_predictions) {
  if (window_predictions.empty()) {
    throw std::invalid_argument("majority_vote: empty prediction list");
  }
  std::map<int, std::size_t> counts;
  for (int p : window_predictions) ++counts[p];
  int best = counts.begin()->first;
  std::size_t best_count = counts.begin()->second;
  for (const auto& [cls, count] : counts) {
    if (count > best_count) {  // map order makes ties pick the smallest id
      best = cls;
      best_count = count;
    }
  }
  return best;
}

std::string MetricsReport::to_json() const {
  json j;
  j["scalars"] = scalars;  // std::map keeps keys sorted
  json pc = json::array();
  for (const auto& c : per_class) {
    pc.push_back({{"class_id", c.class_id},
                  {"precision", c.precision},
                  {"recall", c.recall},
                  {"f1", c.f1},
                  {"auc", c.auc},
                  {"support", c.support}});
  }
  j["per_class"] = pc;
  json pu = json::array();
  for (const auto& u : per_user) {
    pu.push_back({{"user_id", u.user_id},
                  {"mean_pred", u.mean_pred},
                  {"mean_target", u.mean_target},
                  {"mse", u.mse},
                  {"mae", u.mae},
                  {"count", u.count}});
  }
  j["per_user"] = pu;
  j["warnings"] = warnings;
  return j.dump(2);
}

std::string MetricsReport::csv_header() const {
  std::string out;
  for (const auto& [name, value] : scalars) {
    if (!out.empty()) out += ",";
    out += name;
  }
  return out;
}

std::string MetricsReport::csv_row() const {
  std::string out;
  char buf[32];
  for (const auto& [name, value] : scalars) {
    if (!out.empty()) out += ",";
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out += buf;
  }
  return out;
}

MetricsReport regression_metrics(const std::vector<double>& preds,
                                 const std::vector<double>& targets,
                                 const std::vector<std::string>& user_ids) {
  if (preds.size() != targets.size() || preds.size() != user_ids.size()) {
    throw std::invalid_argument("regression_metrics: length mismatch");
  }
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    by_user[user_ids[i]].push_back(i);
  }
  if (by_user.size() < 2) {
    throw DataError(
        "regression_metrics: need at least 2 users for the correlation");
  }

  MetricsReport report;
  std::vector<double> user_mse, user_mae, user_mean_pred, user_mean_target;
  for (const auto& [user, idx] : by_user) {
    double mse = 0, mae = 0, mp = 0, mt = 0;
    for (std::size_t i : idx) {
      const double e = preds[i] - targets[i];
      mse += e * e;
      mae += std::fabs(e);
      mp += preds[i];
      mt += targets[i];
    }
    const double n = static_cast<double>(idx.size());
    mse /= n;
    mae /= n;
    mp /= n;
    mt /= n;
    user_mse.push_back(mse);
    user_mae.push_back(mae);
    user_mean_pred.push_back(mp);
    user_mean_target.push_back(mt);
    report.per_user.push_back({user, mp, mt, mse, mae, idx.size()});
  }

  const double n_users = static_cast<double>(by_user.size());
  report.scalars["mse"] =
      std::accumulate(user_mse.begin(), user_mse.end(), 0.0) / n_users;
  report.scalars["sdse"] = sample_std(user_mse);
  report.scalars["mae"] =
      std::accumulate(user_mae.begin(), user_mae.end(), 0.0) / n_users;
  report.scalars["sdae"] = sample_std(user_mae);
  report.scalars["pearson_corr"] = pearson(user_mean_pred, user_mean_target);
  return report;
}

MetricsReport classification_metrics(
    const std::vector<int>& preds,
    const std::vector<std::vector<double>>& scores,
    const std::vector<int>& labels) {
  if (preds.size() != labels.size() || scores.size() != labels.size()) {
    throw std::invalid_argument("classification_metrics: length mismatch");
  }
  if (labels.empty()) {
    throw std::invalid_argument("classification_metrics: empty inputs");
  }
  const std::size_t n_classes = scores.front().size();
  for (const auto& row : scores) {
    if (row.size() != n_classes) {
      throw std::invalid_argument(
          "classification_metrics: ragged score rows");
    }
    double sum = 0.0;
    for (double s : row) sum += s;
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument(
          "classification_metrics: score rows must sum to 1");
    }
  }

  const double n = static_cast<double>(labels.size());
  std::vector<std::vector<std::size_t>> confusion(
      n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i], p = preds[i];
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes || p < 0 ||
        static_cast<std::size_t>(p) >= n_classes) {
      throw std::invalid_argument(
          "classification_metrics: class id outside the score dimension");
    }
    ++confusion[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)];
    if (l == p) ++correct;
  }

  MetricsReport report;
  report.scalars["accuracy"] = static_cast<double>(correct) / n;

  // Cohen's kappa from integer marginal counts: (n*correct - sum
  // row_c*col_c) / (n^2 - sum row_c*col_c) keeps exactly representable
  // cases exact.
  double pe_counts = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    double row = 0, col = 0;
    for (std::size_t j = 0; j < n_classes; ++j) {
      row += static_cast<double>(confusion[c][j]);
      col += static_cast<double>(confusion[j][c]);
    }
    pe_counts += row * col;
  }
  const double kappa_denom = n * n - pe_counts;
  report.scalars["kappa"] =
      std::fabs(kappa_denom) < 1e-9
          ? (correct == labels.size() ? 1.0 : 0.0)
          : (n * static_cast<double>(correct) - pe_counts) / kappa_denom;

  double f1_sum = 0.0, auc_sum = 0.0;
  std::size_t f1_count = 0, auc_count = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t support = 0;
    for (std::size_t j = 0; j < n_classes; ++j) support += confusion[c][j];
    if (support == 0) {
      report.warnings.push_back("class " + std::to_string(c) +
                                " absent from labels; excluded from macro "
                                "averages");
      continue;
    }
    const double tp = static_cast<double>(confusion[c][c]);
    double fp = 0, fn = 0;
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (j != c) {
        fp += static_cast<double>(confusion[j][c]);
        fn += static_cast<double>(confusion[c][j]);
      }
    }
    const double precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp / (tp + fn);
    const double f1 =
        (precision + recall) > 0 ? 2 * precision * recall / (precision + recall)
                                 : 0.0;
    f1_sum += f1;
    ++f1_count;

    std::vector<double> class_scores(labels.size());
    std::vector<bool> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      class_scores[i] = scores[i][c];
      positive[i] = labels[i] == static_cast<int>(c);
    }
    const double auc = binary_auc(class_scores, positive);
    MetricsReport::PerClass pc;
    pc.class_id = static_cast<int>(c);
    pc.precision = precision;
    pc.recall = recall;
    pc.f1 = f1;
    pc.support = support;
    if (std::isfinite(auc)) {
      pc.auc = auc;
      auc_sum += auc;
      ++auc_count;
    }
    report.per_class.push_back(pc);
  }
  report.scalars["f1_macro"] =
      f1_count ? f1_sum / static_cast<double>(f1_count) : 0.0;
  report.scalars["auc_macro"] =
      auc_count ? auc_sum / static_cast<double>(auc_count) : 0.0;
  return report;
}

}  // namespace relcon
