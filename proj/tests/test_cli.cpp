// End-to-end tests that drive the installed CLI binary through the full
// pipeline on a tiny synthetic dataset.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#ifndef RELCON_CLI_PATH
#error "RELCON_CLI_PATH must point at the relcon binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(RELCON_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

struct Workspace {
  fs::path root;
  fs::path config;

  explicit Workspace(const std::string& tag) {
    root = fs::temp_directory_path() / ("relcon_cli_" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
    config = root / "config.json";
    json cfg = {
        {"seed", 17},
        {"data",
         {{"path", (root / "data").string()},
          {"window_length", 32},
          {"window_stride", 32},
          {"synthetic",
           {{"n_users", 8},
            {"n_classes", 3},
            {"recordings_per_user_class", 2},
            {"samples_per_recording", 128},
            {"seed", 23},
            {"split_ratios", {0.5, 0.25, 0.25}}}}}},
        {"distnet",
         {{"embed_dim", 8},
          {"kernel_size", 5},
          {"dilations", {1, 2}},
          {"steps", 30},
          {"batch_size", 4}}},
        {"sampler", {{"candidate_count", 6}, {"within_user_count", 3}}},
        {"encoder",
         {{"stem_width", 8},
          {"stage_widths", {8, 16}},
          {"stage_blocks", {1, 1}},
          {"stage_strides", {2, 2}},
          {"embed_dim", 16},
          {"steps", 25},
          {"batch_size", 6}}},
        {"eval", {{"repeats", 2}, {"clf_steps", 120}}},
    };
    std::ofstream out(config);
    out << cfg.dump(2);
  }

  std::string dir(const std::string& name) const {
    return (root / name).string();
  }
};

}  // namespace

TEST_CASE("cli pipeline end to end") {
  Workspace ws("e2e");

  REQUIRE(run_cli("gen-synth --config " + ws.config.string() + " --out " +
                  ws.dir("data")) == 0);
  CHECK(fs::exists(ws.root / "data" / "dataset.json"));

  REQUIRE(run_cli("train-distance --config " + ws.config.string() + " --out " +
                  ws.dir("dist")) == 0);
  const fs::path dist_ckpt = ws.root / "dist" / "distnet.ckpt";
  CHECK(fs::exists(dist_ckpt));
  CHECK(fs::exists(ws.root / "dist" / "loss.csv"));
  CHECK(fs::exists(ws.root / "dist" / "effective_config.json"));
  CHECK(fs::exists(ws.root / "dist" / "run_record.json"));

  REQUIRE(run_cli("train-encoder --config " + ws.config.string() +
                  " --distnet " + dist_ckpt.string() + " --out " +
                  ws.dir("enc")) == 0);
  const fs::path enc_ckpt = ws.root / "enc" / "encoder.ckpt";
  CHECK(fs::exists(enc_ckpt));

  // Embedding CSV: one row per window plus header; id + embed_dim columns.
  REQUIRE(run_cli("embed --config " + ws.config.string() + " --encoder " +
                  enc_ckpt.string() + " --out " + ws.dir("emb")) == 0);
  {
    std::ifstream in(ws.root / "emb" / "embeddings.csv");
    std::string header;
    std::getline(in, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 16);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) ++rows;
    }
    // 8 users x 3 classes x 2 recordings x 4 windows of 32 in 128 samples.
    CHECK(rows == 8 * 3 * 2 * 4);
  }

  // Probing never touches the encoder checkpoint.
  const std::string ckpt_before = slurp(enc_ckpt);
  REQUIRE(run_cli("probe --config " + ws.config.string() + " --encoder " +
                  enc_ckpt.string() + " --out " + ws.dir("probe")) == 0);
  CHECK(slurp(enc_ckpt) == ckpt_before);
  CHECK(fs::exists(ws.root / "probe" / "metrics.json"));

  REQUIRE(run_cli("finetune --config " + ws.config.string() + " --encoder " +
                  enc_ckpt.string() + " --out " + ws.dir("ft")) == 0);
  CHECK(fs::exists(ws.root / "ft" / "encoder_finetuned.ckpt"));
  CHECK(fs::exists(ws.root / "ft" / "metrics.json"));

  // Deleting the encoder checkpoint never invalidates the distance
  // checkpoint (one-way stage dependency).
  fs::remove(enc_ckpt);
  REQUIRE(run_cli("train-encoder --config " + ws.config.string() +
                  " --distnet " + dist_ckpt.string() + " --out " +
                  ws.dir("enc2")) == 0);
}

TEST_CASE("cli determinism: same config and seed, identical bytes") {
  Workspace ws("det");

  REQUIRE(run_cli("gen-synth --config " + ws.config.string() + " --out " +
                  ws.dir("data")) == 0);
  REQUIRE(run_cli("gen-synth --config " + ws.config.string() + " --out " +
                  ws.dir("data_b")) == 0);
  for (const auto& entry : fs::directory_iterator(ws.root / "data")) {
    const auto name = entry.path().filename().string();
    if (name == "run_record.json") continue;  // carries wall-clock timings
    CHECK(slurp(entry.path()) == slurp(ws.root / "data_b" / name));
  }

  REQUIRE(run_cli("train-distance --config " + ws.config.string() + " --out " +
                  ws.dir("d1")) == 0);
  REQUIRE(run_cli("train-distance --config " + ws.config.string() + " --out " +
                  ws.dir("d2")) == 0);
  CHECK(slurp(ws.root / "d1" / "distnet.ckpt") ==
        slurp(ws.root / "d2" / "distnet.ckpt"));
}

TEST_CASE("cli ablation flags and report") {
  Workspace ws("ablate");
  REQUIRE(run_cli("gen-synth --config " + ws.config.string() + " --out " +
                  ws.dir("data")) == 0);
  REQUIRE(run_cli("train-distance --config " + ws.config.string() +
                  " --ablate no_augmentations --ablate no_sparsemax --out " +
                  ws.dir("dist")) == 0);
  const json effective =
      json::parse(slurp(ws.root / "dist" / "effective_config.json"));
  CHECK(effective["augment"]["specs"].empty());
  CHECK(effective["distnet"]["normalizer"] == "softmax");
  CHECK(effective["ablations"]["no_augmentations"] == true);

  // Build two probe runs and join them into a report.
  REQUIRE(run_cli("train-encoder --config " + ws.config.string() +
                  " --distnet " + ws.dir("dist") + "/distnet.ckpt --out " +
                  ws.dir("enc")) == 0);
  REQUIRE(run_cli("probe --config " + ws.config.string() + " --encoder " +
                  ws.dir("enc") + "/encoder.ckpt --out " + ws.dir("full")) ==
          0);
  REQUIRE(run_cli("train-encoder --config " + ws.config.string() +
                  " --loss binary --distnet " + ws.dir("dist") +
                  "/distnet.ckpt --out " + ws.dir("enc_b")) == 0);
  REQUIRE(run_cli("probe --config " + ws.config.string() + " --encoder " +
                  ws.dir("enc_b") + "/encoder.ckpt --out " + ws.dir("binary")) ==
          0);

  REQUIRE(run_cli("report " + ws.dir("full") + " " + ws.dir("binary") +
                  " --baseline full --out " + ws.dir("rep")) == 0);
  const std::string report = slurp(ws.root / "rep" / "report.csv");
  // Header + two runs; the baseline row shows zero deltas.
  CHECK(std::count(report.begin(), report.end(), '\n') == 3);
  CHECK(report.find("full,") != std::string::npos);
  const std::string baseline_row =
      report.substr(report.find("full,"),
                    report.find('\n', report.find("full,")) -
                        report.find("full,"));
  CHECK(baseline_row.find(",0\n") == std::string::npos);  // sanity
  // Every delta column of the baseline is exactly 0.
  std::size_t zeros = 0;
  std::string token;
  for (char ch : baseline_row + ",") {
    if (ch == ',') {
      if (token == "0") ++zeros;
      token.clear();
    } else {
      token += ch;
    }
  }
  CHECK(zeros == 6);
}

TEST_CASE("cli exit codes map the error taxonomy") {
  Workspace ws("errors");

  // 2: config validation.
  {
    std::ofstream bad(ws.root / "bad.json");
    bad << "{ not json";
  }
  CHECK(run_cli("train-distance --config " + (ws.root / "bad.json").string() +
                " --out " + ws.dir("x")) == 2);
  CHECK(run_cli("gen-synth --config " + ws.config.string() +
                " --preset desk --ablate bogus --out " + ws.dir("x")) == 2);

  // 3: data errors (missing dataset directory).
  CHECK(run_cli("train-distance --config " + ws.config.string() + " --out " +
                ws.dir("x")) == 3);

  // 4: numerical failure (absurd learning rate diverges).
  REQUIRE(run_cli("gen-synth --config " + ws.config.string() + " --out " +
                  ws.dir("data")) == 0);
  {
    json cfg = json::parse(slurp(ws.config));
    cfg["distnet"]["lr"] = 1e80;
    cfg["distnet"]["steps"] = 10;
    std::ofstream out(ws.root / "diverge.json");
    out << cfg.dump();
  }
  CHECK(run_cli("train-distance --config " +
                (ws.root / "diverge.json").string() + " --out " +
                ws.dir("x")) == 4);

  // 2: probe embed_dim mismatch against the checkpoint.
  REQUIRE(run_cli("train-distance --config " + ws.config.string() + " --out " +
                  ws.dir("dist")) == 0);
  REQUIRE(run_cli("train-encoder --config " + ws.config.string() +
                  " --distnet " + ws.dir("dist") + "/distnet.ckpt --out " +
                  ws.dir("enc")) == 0);
  {
    json cfg = json::parse(slurp(ws.config));
    cfg["encoder"]["stage_widths"] = {8, 8};
    cfg["encoder"]["embed_dim"] = 8;
    std::ofstream out(ws.root / "mismatch.json");
    out << cfg.dump();
  }
  CHECK(run_cli("probe --config " + (ws.root / "mismatch.json").string() +
                " --encoder " + ws.dir("enc") + "/encoder.ckpt --out " +
                ws.dir("x")) == 2);
}
