#include <cmath>
#include <random>

#include <doctest.h>

#include "relcon/errors.hpp"
#include "relcon/eval.hpp"

using namespace relcon;

namespace {

Tensor random_embeddings(std::size_t B, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(B * d);
  for (auto& x : v) x = dist(rng);
  return Tensor({B, d}, std::move(v));
}

// Gradient-descent-to-convergence oracle for the ridge objective
// sum (x.w + b - y)^2 + lambda*|w|^2, independent of the closed form.
std::pair<std::vector<double>, double> ridge_gd_oracle(
    const Tensor& X, const std::vector<double>& y, double lambda) {
  const std::size_t B = X.dim(0), d = X.dim(1);
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  const double lr = 1e-3;
  for (int iter = 0; iter < 200000; ++iter) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
      double pred = b;
      for (std::size_t i = 0; i < d; ++i) pred += X.at(r * d + i) * w[i];
      const double e = 2.0 * (pred - y[r]);
      for (std::size_t i = 0; i < d; ++i) gw[i] += e * X.at(r * d + i);
      gb += e;
    }
    double gnorm = gb * gb;
    for (std::size_t i = 0; i < d; ++i) {
      gw[i] += 2.0 * lambda * w[i];
      gnorm += gw[i] * gw[i];
    }
    for (std::size_t i = 0; i < d; ++i) w[i] -= lr * gw[i];
    b -= lr * gb;
    if (std::sqrt(gnorm) < 1e-10) break;
  }
  return {w, b};
}

}  // namespace

TEST_CASE("ridge recovers an exactly linear relationship") {
  const std::size_t B = 40, d = 5;
  Tensor X = random_embeddings(B, d, 1);
  std::vector<double> true_w{0.5, -1.0, 2.0, 0.0, 0.25};
  std::vector<double> y(B);
  for (std::size_t r = 0; r < B; ++r) {
    y[r] = 0.75;
    for (std::size_t i = 0; i < d; ++i) y[r] += X.at(r * d + i) * true_w[i];
  }
  RegressionProbe probe = fit_linear_regression(X, y, 0.0);
  double max_resid = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    std::vector<double> row(d);
    for (std::size_t i = 0; i < d; ++i) row[i] = X.at(r * d + i);
    max_resid = std::max(max_resid, std::fabs(probe.predict(row) - y[r]));
  }
  CHECK(max_resid < 1e-8);
}

TEST_CASE("huge ridge collapses to the target mean") {
  const std::size_t B = 30, d = 4;
  Tensor X = random_embeddings(B, d, 2);
  std::vector<double> y(B);
  double mean = 0.0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(2.0, 1.0);
  for (auto& t : y) {
    t = dist(rng);
    mean += t;
  }
  mean /= static_cast<double>(B);
  RegressionProbe probe = fit_linear_regression(X, y, 1e12);
  for (double w : probe.weights) CHECK(std::fabs(w) < 1e-6);
  std::vector<double> zero(d, 0.0);
  CHECK(probe.predict(zero) == doctest::Approx(mean).epsilon(1e-9));
}

TEST_CASE("ridge matches a gradient-descent oracle") {
  const std::size_t B = 30, d = 4;
  Tensor X = random_embeddings(B, d, 4);
  std::vector<double> y(B);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (auto& t : y) t = dist(rng);
  const double lambda = 0.1;
  RegressionProbe probe = fit_linear_regression(X, y, lambda);
  auto [ow, ob] = ridge_gd_oracle(X, y, lambda);
  for (std::size_t i = 0; i < d; ++i) {
    CHECK(std::fabs(probe.weights[i] - ow[i]) < 1e-6);
  }
  CHECK(std::fabs(probe.bias - ob) < 1e-6);
}

TEST_CASE("singular unregularized system suggests ridge_lambda") {
  // Fewer rows than columns cannot be solved without regularization.
  Tensor X = random_embeddings(3, 6, 6);
  std::vector<double> y{1.0, 2.0, 3.0};
  try {
    fit_linear_regression(X, y, 0.0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ridge_lambda") != std::string::npos);
  }
  CHECK_NOTHROW(fit_linear_regression(X, y, 1e-3));
}

TEST_CASE("classifier separates linearly separable embeddings") {
  const std::size_t B = 200, d = 4;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist;
  std::vector<double> v(B * d);
  std::vector<int> labels(B);
  for (std::size_t r = 0; r < B; ++r) {
    labels[r] = static_cast<int>(r % 2);
    for (std::size_t i = 0; i < d; ++i) {
      v[r * d + i] = dist(rng) + (labels[r] ? 4.0 : -4.0);
    }
  }
  Tensor X({B, d}, v);
  ProbeConfig cfg;
  cfg.seed = 1;
  for (ProbeKind kind : {ProbeKind::kLinearClf, ProbeKind::kMlpClf}) {
    ClassifierProbe probe = fit_classifier(X, labels, kind, cfg);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < B; ++r) {
      std::vector<double> row(d);
      for (std::size_t i = 0; i < d; ++i) row[i] = v[r * d + i];
      if (probe.predict(row) == labels[r]) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(B) >= 0.99);
  }
}

TEST_CASE("shuffled labels score near chance on held-out data") {
  const std::size_t B = 400, d = 6;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> dist;
  auto make_set = [&](std::size_t n) {
    std::vector<double> v(n * d);
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
      labels[r] = static_cast<int>(r % 2);
      for (std::size_t i = 0; i < d; ++i) {
        v[r * d + i] = dist(rng) + (labels[r] ? 1.5 : -1.5);
      }
    }
    return std::make_pair(Tensor({n, d}, v), labels);
  };
  auto [train_X, train_labels] = make_set(B);
  auto [test_X, test_labels] = make_set(B);

  std::vector<int> shuffled = train_labels;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  ProbeConfig cfg;
  cfg.seed = 2;
  ClassifierProbe probe =
      fit_classifier(train_X, shuffled, ProbeKind::kLinearClf, cfg);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < B; ++r) {
    std::vector<double> row(d);
    for (std::size_t i = 0; i < d; ++i) row[i] = test_X.at(r * d + i);
    if (probe.predict(row) == test_labels[r]) ++correct;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(B);
  CHECK(acc > 0.4);
  CHECK(acc < 0.6);
}

TEST_CASE("classifier fitting is deterministic under a fixed seed") {
  Tensor X = random_embeddings(60, 5, 9);
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < 60; ++i) labels[i] = static_cast<int>(i % 3);
  ProbeConfig cfg;
  cfg.seed = 11;
  ClassifierProbe a = fit_classifier(X, labels, ProbeKind::kMlpClf, cfg);
  ClassifierProbe b = fit_classifier(X, labels, ProbeKind::kMlpClf, cfg);
  CHECK(a.w_out.values() == b.w_out.values());
  CHECK(a.w_hidden.values() == b.w_hidden.values());
}

TEST_CASE("single-class training sets are rejected") {
  Tensor X = random_embeddings(10, 3, 10);
  std::vector<int> labels(10, 0);
  ProbeConfig cfg;
  CHECK_THROWS_AS(fit_classifier(X, labels, ProbeKind::kLinearClf, cfg),
                  std::invalid_argument);
}

TEST_CASE("majority vote rules") {
  CHECK(majority_vote({3, 3, 3}) == 3);
  CHECK(majority_vote({1, 1, 2}) == 1);
  CHECK(majority_vote({2, 1}) == 1);  // tie: smallest class id
  CHECK(majority_vote({5}) == 5);
  CHECK_THROWS_AS(majority_vote({}), std::invalid_argument);

  // Any permutation of the same multiset returns the same class.
  std::vector<int> preds{0, 2, 2, 1, 1, 0, 2};
  const int base = majority_vote(preds);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(preds.begin(), preds.end(), rng);
    CHECK(majority_vote(preds) == base);
  }
}

TEST_CASE("regression metrics on exact predictions") {
  std::vector<double> preds{1.0, 2.0, 3.0, 4.0};
  std::vector<std::string> users{"a", "a", "b", "b"};
  MetricsReport r = regression_metrics(preds, preds, users);
  CHECK(r.scalars.at("mse") == 0.0);
  CHECK(r.scalars.at("mae") == 0.0);
  CHECK(r.scalars.at("pearson_corr") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant offset gives MAE = delta and SDAE = 0") {
  std::vector<double> targets{1.0, 2.0, 5.0, 7.0, 0.5, 2.5};
  std::vector<double> preds = targets;
  const double delta = 0.75;
  for (auto& p : preds) p += delta;
  std::vector<std::string> users{"a", "a", "b", "b", "c", "c"};
  MetricsReport r = regression_metrics(preds, targets, users);
  CHECK(r.scalars.at("mae") == doctest::Approx(delta).epsilon(1e-12));
  CHECK(r.scalars.at("sdae") == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two-user hand-computed regression metrics") {
  // User a: (pred,target) = (1,0), (2,0); user b: (0,1), (0,3).
  std::vector<double> preds{1.0, 2.0, 0.0, 0.0};
  std::vector<double> targets{0.0, 0.0, 1.0, 3.0};
  std::vector<std::string> users{"a", "a", "b", "b"};
  MetricsReport r = regression_metrics(preds, targets, users);
  CHECK(std::fabs(r.scalars.at("mse") - 3.75) < 1e-12);
  CHECK(std::fabs(r.scalars.at("sdse") - 2.5 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::fabs(r.scalars.at("mae") - 1.75) < 1e-12);
  CHECK(std::fabs(r.scalars.at("sdae") - 0.5 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::fabs(r.scalars.at("pearson_corr") - (-1.0)) < 1e-12);
}

TEST_CASE("regression metrics ignore sample order") {
  std::vector<double> preds{1.0, 2.0, 0.5, 3.0, 4.0};
  std::vector<double> targets{1.1, 1.5, 0.0, 3.5, 4.5};
  std::vector<std::string> users{"a", "b", "a", "b", "a"};
  MetricsReport base = regression_metrics(preds, targets, users);

  std::vector<std::size_t> perm{4, 0, 3, 1, 2};
  std::vector<double> p2, t2;
  std::vector<std::string> u2;
  for (auto i : perm) {
    p2.push_back(preds[i]);
    t2.push_back(targets[i]);
    u2.push_back(users[i]);
  }
  MetricsReport shuffled = regression_metrics(p2, t2, u2);
  for (const auto& [name, value] : base.scalars) {
    CHECK(shuffled.scalars.at(name) == doctest::Approx(value).epsilon(1e-12));
  }
}

TEST_CASE("fewer than two users cannot produce a correlation") {
  std::vector<double> preds{1.0, 2.0};
  std::vector<std::string> users{"a", "a"};
  CHECK_THROWS_AS(regression_metrics(preds, preds, users), DataError);
}

TEST_CASE("perfect classification scores ones across the board") {
  std::vector<int> labels{0, 1, 2, 0, 1, 2};
  std::vector<std::vector<double>> scores;
  for (int l : labels) {
    std::vector<double> row(3, 0.05);
    row[static_cast<std::size_t>(l)] = 0.9;
    scores.push_back(row);
  }
  MetricsReport r = classification_metrics(labels, scores, labels);
  CHECK(r.scalars.at("accuracy") == 1.0);
  CHECK(r.scalars.at("f1_macro") == 1.0);
  CHECK(r.scalars.at("kappa") == 1.0);
  CHECK(r.scalars.at("auc_macro") == 1.0);
}

TEST_CASE("kappa on the 40/10/20/30 confusion matrix is exactly 0.4") {
  std::vector<int> labels, preds;
  auto push = [&](int l, int p, int count) {
    for (int i = 0; i < count; ++i) {
      labels.push_back(l);
      preds.push_back(p);
    }
  };
  push(0, 0, 40);
  push(0, 1, 10);
  push(1, 0, 20);
  push(1, 1, 30);
  std::vector<std::vector<double>> scores;
  for (int p : preds) {
    scores.push_back(p == 0 ? std::vector<double>{0.8, 0.2}
                            : std::vector<double>{0.2, 0.8});
  }
  MetricsReport r = classification_metrics(preds, scores, labels);
  CHECK(r.scalars.at("accuracy") == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(r.scalars.at("kappa") == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("uniform random scores give chance-level AUC") {
  const std::size_t n = 10000;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> labels(n), preds(n);
  std::vector<std::vector<double>> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    const double a = u(rng);
    scores[i] = {a, 1.0 - a};
    preds[i] = a >= 0.5 ? 0 : 1;
  }
  MetricsReport r = classification_metrics(preds, scores, labels);
  CHECK(std::fabs(r.scalars.at("auc_macro") - 0.5) < 0.05);
}

TEST_CASE("AUC is invariant under strictly monotone score transforms") {
  const std::size_t n = 500;
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<int> labels(n), preds(n);
  std::vector<std::vector<double>> base(n), warped(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(rng() % 2);
    const double s = u(rng) + (labels[i] ? 0.02 : -0.02);
    base[i] = {1.0 - s, s};
    // Strictly monotone remap of the class-1 score; rows stay on the simplex.
    const double t = s * s * s;
    warped[i] = {1.0 - t, t};
    preds[i] = s >= 0.5 ? 1 : 0;
  }
  MetricsReport a = classification_metrics(preds, base, labels);
  MetricsReport b = classification_metrics(preds, warped, labels);
  CHECK(std::fabs(a.scalars.at("auc_macro") - b.scalars.at("auc_macro")) <
        1e-12);
}

TEST_CASE("classes absent from labels are excluded with a warning") {
  std::vector<int> labels{0, 0, 1, 1};
  std::vector<int> preds{0, 2, 1, 1};
  std::vector<std::vector<double>> scores{
      {0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}, {0.1, 0.8, 0.1}, {0.2, 0.7, 0.1}};
  MetricsReport r = classification_metrics(preds, scores, labels);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("class 2") != std::string::npos);
  CHECK(r.per_class.size() == 2);
}

TEST_CASE("metrics report serializes deterministically") {
  std::vector<double> preds{1.0, 2.0, 3.0, 4.0};
  std::vector<std::string> users{"a", "a", "b", "b"};
  MetricsReport r1 = regression_metrics(preds, preds, users);
  MetricsReport r2 = regression_metrics(preds, preds, users);
  CHECK(r1.to_json() == r2.to_json());
  CHECK(r1.csv_row() == r2.csv_row());
  CHECK(r1.csv_header() == "mae,mse,pearson_corr,sdae,sdse");
}

TEST_CASE("finetune with zero steps leaves the encoder bitwise unchanged") {
  EncoderHyper hyper = desk_encoder_hyper();
  hyper.stem_width = 8;
  hyper.stage_widths = {8, 8};
  hyper.stage_blocks = {1, 1};
  hyper.stage_strides = {2, 2};
  hyper.embed_dim = 8;
  EncoderParams init = init_encoder(hyper, 21);

  std::vector<Window> windows;
  std::mt19937_64 rng(22);
  std::normal_distribution<double> dist;
  for (int i = 0; i < 8; ++i) {
    Window w;
    w.user_id = "u";
    w.recording_id = "r" + std::to_string(i);
    w.length = 16;
    w.samples.resize(16 * 3);
    for (auto& x : w.samples) x = dist(rng);
    w.label = i % 2;
    windows.push_back(std::move(w));
  }

  FinetuneConfig cfg;
  cfg.steps = 0;
  cfg.seed = 5;
  FinetuneResult result = finetune(init, windows, cfg);
  auto before = init.named_parameters();
  auto after = result.encoder.named_parameters();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(after[i].second.values() == before[i].second.values());
  }
}

TEST_CASE("finetuning decreases the loss and beats the frozen probe - 2pts") {
  SyntheticSpec spec;
  spec.n_users = 6;
  spec.n_classes = 2;
  spec.recordings_per_user_class = 1;
  spec.samples_per_recording = 128;
  spec.seed = 23;
  Dataset ds = generate_synthetic(spec);
  auto windows = make_windows(ds, 32, 32);

  EncoderHyper hyper = desk_encoder_hyper();
  hyper.stem_width = 8;
  hyper.stage_widths = {8, 16};
  hyper.stage_blocks = {1, 1};
  hyper.stage_strides = {2, 2};
  hyper.embed_dim = 16;
  EncoderParams init = init_encoder(hyper, 24);

  // Split windows into train/test halves by recording parity.
  std::vector<Window> train, test;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    (i % 2 == 0 ? train : test).push_back(windows[i]);
  }

  // Frozen linear probe on the random-init encoder.
  std::vector<int> train_labels, test_labels;
  for (const auto& w : train) train_labels.push_back(w.label);
  for (const auto& w : test) test_labels.push_back(w.label);
  Tensor train_emb = encode_batch(train, init);
  Tensor test_emb = encode_batch(test, init);
  ProbeConfig pcfg;
  pcfg.seed = 3;
  ClassifierProbe frozen =
      fit_classifier(train_emb, train_labels, ProbeKind::kLinearClf, pcfg);
  const std::size_t d = static_cast<std::size_t>(hyper.embed_dim);
  auto accuracy_of = [&](auto&& classify) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (classify(i) == test_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
  };
  const double frozen_acc = accuracy_of([&](std::size_t i) {
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = test_emb.at(i * d + j);
    return frozen.predict(row);
  });

  FinetuneConfig cfg;
  cfg.steps = 60;
  cfg.batch_size = 8;
  cfg.lr = 1e-3;
  cfg.seed = 6;
  FinetuneResult result = finetune(init, train, cfg);

  CHECK(result.curve.front().loss > result.curve.back().loss);

  const double tuned_acc = accuracy_of([&](std::size_t i) {
    auto emb = encode(test[i], result.encoder);
    return result.head.predict(emb);
  });
  CHECK(tuned_acc >= frozen_acc - 0.02);
}
