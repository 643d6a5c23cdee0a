#include "relcon/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "relcon/errors.hpp"

namespace relcon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& file,
                    std::size_t line_no) {
  double out = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw DataError(file + ":" + std::to_string(line_no) +
                    ": malformed numeric field '" + field + "'");
  }
  if (!std::isfinite(out)) {
    throw DataError(file + ":" + std::to_string(line_no) +
                    ": non-finite value '" + field + "'");
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::mt19937_64 seeded_stream(std::uint64_t seed, const char* tag, int a = 0,
                              int b = 0, int c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag[0]),
                    static_cast<std::uint32_t>(a + 1),
                    static_cast<std::uint32_t>(b + 1),
                    static_cast<std::uint32_t>(c + 1)};
  return std::mt19937_64(seq);
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split SplitManifest::of(const std::string& user_id) const {
  auto it = by_user.find(user_id);
  if (it == by_user.end()) {
    throw DataError("split manifest has no entry for user '" + user_id + "'");
  }
  return it->second;
}

std::vector<std::string> SplitManifest::users_in(Split s) const {
  std::vector<std::string> out;
  for (const auto& [user, split] : by_user) {
    if (split == s) out.push_back(user);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV dataset I/O
// ---------------------------------------------------------------------------

Dataset load_csv_dataset(const std::string& root, std::size_t min_length,
                         LoadReport* report) {
  const fs::path root_path(root);
  const fs::path manifest_path = root_path / "dataset.json";
  if (!fs::exists(manifest_path)) {
    throw DataError("load_csv_dataset: missing manifest " +
                    manifest_path.string());
  }
  std::ifstream mf(manifest_path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw DataError("load_csv_dataset: malformed dataset.json: " +
                    std::string(e.what()));
  }

  Dataset ds;
  ds.sample_rate_hz = manifest.value("sample_rate_hz", 0.0);
  if (!(ds.sample_rate_hz > 0.0)) {
    throw DataError("load_csv_dataset: sample_rate_hz must be positive");
  }
  ds.label_names =
      manifest.value("label_names", std::vector<std::string>{});
  if (manifest.contains("splits")) {
    for (const auto& [user, name] : manifest["splits"].items()) {
      const std::string s = name.get<std::string>();
      if (s == "train") ds.splits.by_user[user] = Split::kTrain;
      else if (s == "val") ds.splits.by_user[user] = Split::kVal;
      else if (s == "test") ds.splits.by_user[user] = Split::kTest;
      else throw DataError("load_csv_dataset: unknown split '" + s + "'");
    }
  }

  if (!manifest.contains("recordings") || !manifest["recordings"].is_array()) {
    throw DataError("load_csv_dataset: manifest lists no recordings");
  }

  for (const auto& item : manifest["recordings"]) {
    Recording rec;
    rec.user_id = item.value("user_id", "");
    rec.recording_id = item.value("recording_id", "");
    rec.sample_rate_hz = ds.sample_rate_hz;
    const std::string file = item.value("file", "");
    if (rec.user_id.empty() || rec.recording_id.empty() || file.empty()) {
      throw DataError(
          "load_csv_dataset: recording entry needs file, user_id and "
          "recording_id");
    }
    if (item.contains("targets")) {
      for (const auto& [name, v] : item["targets"].items()) {
        rec.targets[name] = v.get<double>();
      }
    }

    const fs::path csv_path = root_path / file;
    std::ifstream in(csv_path);
    if (!in) {
      throw DataError("load_csv_dataset: cannot open " + csv_path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
      throw DataError(csv_path.string() + ": empty file");
    }
    auto header = split_csv_line(line);
    bool has_label = false;
    if (header.size() == 5 && header[4] == "label") {
      has_label = true;
    } else if (header.size() != 4) {
      throw DataError(csv_path.string() +
                      ":1: expected header t,x,y,z[,label]");
    }
    if (header[0] != "t" || header[1] != "x" || header[2] != "y" ||
        header[3] != "z") {
      throw DataError(csv_path.string() +
                      ":1: expected header t,x,y,z[,label]");
    }

    const std::size_t expected_cols = has_label ? 5 : 4;
    double prev_t = -std::numeric_limits<double>::infinity();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != expected_cols) {
        throw DataError(csv_path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(expected_cols) +
                        " columns, got " + std::to_string(fields.size()));
      }
      const double t = parse_double(fields[0], csv_path.string(), line_no);
      if (!(t > prev_t)) {
        throw DataError(csv_path.string() + ":" + std::to_string(line_no) +
                        ": non-monotonic timestamp");
      }
      prev_t = t;
      for (std::size_t c = 0; c < 3; ++c) {
        rec.samples.push_back(
            parse_double(fields[1 + c], csv_path.string(), line_no));
      }
      if (has_label) {
        rec.labels.push_back(static_cast<int>(
            parse_double(fields[4], csv_path.string(), line_no)));
      }
    }
    if (rec.length() == 0) {
      throw DataError(csv_path.string() + ": no samples");
    }

    if (min_length > 0 && rec.length() < min_length) {
      if (report) {
        ++report->skipped_short;
        report->warnings.push_back("recording '" + rec.recording_id +
                                   "' shorter than " +
                                   std::to_string(min_length) +
                                   " samples; excluded");
      }
      continue;
    }
    ds.recordings.push_back(std::move(rec));
    if (report) ++report->recordings_loaded;
  }
  return ds;
}

void save_csv_dataset(const Dataset& dataset, const std::string& root) {
  const fs::path root_path(root);
  fs::create_directories(root_path);

  json manifest;
  manifest["sample_rate_hz"] = dataset.sample_rate_hz;
  manifest["label_names"] = dataset.label_names;
  json recs = json::array();
  for (std::size_t i = 0; i < dataset.recordings.size(); ++i) {
    const Recording& rec = dataset.recordings[i];
    const std::string file = rec.recording_id + ".csv";
    json item;
    item["file"] = file;
    item["user_id"] = rec.user_id;
    item["recording_id"] = rec.recording_id;
    if (!rec.targets.empty()) {
      json t;
      for (const auto& [name, v] : rec.targets) t[name] = v;
      item["targets"] = t;
    }
    recs.push_back(item);

    std::ofstream out(root_path / file, std::ios::trunc);
    if (!out) {
      throw DataError("save_csv_dataset: cannot write " +
                      (root_path / file).string());
    }
    const bool has_label = !rec.labels.empty();
    out << (has_label ? "t,x,y,z,label\n" : "t,x,y,z\n");
    for (std::size_t s = 0; s < rec.length(); ++s) {
      const double t = static_cast<double>(s) / rec.sample_rate_hz;
      out << format_g17(t) << "," << format_g17(rec.samples[s * 3]) << ","
          << format_g17(rec.samples[s * 3 + 1]) << ","
          << format_g17(rec.samples[s * 3 + 2]);
      if (has_label) out << "," << rec.labels[s];
      out << "\n";
    }
  }
  manifest["recordings"] = recs;
  if (!dataset.splits.by_user.empty()) {
    json splits;
    for (const auto& [user, s] : dataset.splits.by_user) {
      splits[user] = split_name(s);
    }
    manifest["splits"] = splits;
  }

  std::ofstream mf(root_path / "dataset.json", std::ios::trunc);
  mf << manifest.dump(2) << "\n";
  if (!mf) {
    throw DataError("save_csv_dataset: cannot write dataset.json");
  }
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

Window window_at(const Recording& rec, std::size_t offset, std::size_t T) {
  if (T == 0) throw std::invalid_argument("window_at: window length must be > 0");
  if (offset + T > rec.length()) {
    throw std::invalid_argument("window_at: window extends past recording '" +
                                rec.recording_id + "'");
  }
  Window w;
  w.user_id = rec.user_id;
  w.recording_id = rec.recording_id;
  w.offset = offset;
  w.length = T;
  w.samples.assign(
      rec.samples.begin() + static_cast<std::ptrdiff_t>(offset * 3),
      rec.samples.begin() + static_cast<std::ptrdiff_t>((offset + T) * 3));
  w.targets = rec.targets;
  if (!rec.labels.empty()) {
    // Majority label over the span; ties go to the smallest class id.
    std::map<int, std::size_t> counts;
    for (std::size_t s = offset; s < offset + T; ++s) ++counts[rec.labels[s]];
    std::size_t best = 0;
    int best_label = -1;
    for (const auto& [label, count] : counts) {
      if (count > best) {
        best = count;
        best_label = label;
      }
    }
    w.label = best_label;
  }
  return w;
}

std::vector<Window> make_windows(const Recording& rec, std::size_t T,
                                 std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("make_windows: stride must be > 0");
  if (T == 0) throw std::invalid_argument("make_windows: window length must be > 0");
  if (rec.length() < T) {
    throw std::invalid_argument("make_windows: recording '" +
                                rec.recording_id + "' shorter than window");
  }
  std::vector<Window> out;
  for (std::size_t off = 0; off + T <= rec.length(); off += stride) {
    out.push_back(window_at(rec, off, T));
  }
  return out;
}

std::vector<Window> make_windows(const Dataset& dataset, std::size_t T,
                                 std::size_t stride, LoadReport* report) {
  std::vector<Window> out;
  for (const auto& rec : dataset.recordings) {
    if (rec.length() < T) {
      if (report) {
        ++report->skipped_short;
        report->warnings.push_back("recording '" + rec.recording_id +
                                   "' shorter than window; excluded");
      }
      continue;
    }
    auto ws = make_windows(rec, T, stride);
    out.insert(out.end(), std::make_move_iterator(ws.begin()),
               std::make_move_iterator(ws.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitManifest split_by_user(const Dataset& dataset,
                            const std::array<double, 3>& ratios,
                            std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ConfigError("split_by_user: ratios must sum to 1");
  }
  std::vector<std::string> users;
  for (const auto& rec : dataset.recordings) users.push_back(rec.user_id);
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());

  std::mt19937_64 rng(seed);
  std::shuffle(users.begin(), users.end(), rng);

  const auto n = static_cast<double>(users.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * n));
  const auto n_train_val =
      static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * n));

  SplitManifest manifest;
  for (std::size_t i = 0; i < users.size(); ++i) {
    Split s = Split::kTest;
    if (i < n_train) s = Split::kTrain;
    else if (i < n_train_val) s = Split::kVal;
    manifest.by_user[users[i]] = s;
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// WindowPool
// ---------------------------------------------------------------------------

WindowPool::WindowPool(const Dataset& dataset, std::size_t T,
                       const std::vector<std::string>& users)
    : T_(T) {
  if (T == 0) throw std::invalid_argument("WindowPool: window length must be > 0");
  const bool filter = !users.empty();
  std::set<std::string> allowed(users.begin(), users.end());
  for (const auto& rec : dataset.recordings) {
    if (filter && allowed.count(rec.user_id) == 0) continue;
    if (rec.length() < T) continue;
    RecRef ref{&rec, rec.length() - T + 1};
    recs_.push_back(ref);
    by_user_[rec.user_id].push_back(ref);
    user_totals_[rec.user_id] += ref.positions;
    total_positions_ += ref.positions;
  }
  if (recs_.empty()) {
    throw DataError("WindowPool: no recording is at least " +
                    std::to_string(T) + " samples long");
  }
}

std::size_t WindowPool::user_positions(const std::string& user_id) const {
  auto it = user_totals_.find(user_id);
  return it == user_totals_.end() ? 0 : it->second;
}

std::vector<std::string> WindowPool::users() const {
  std::vector<std::string> out;
  for (const auto& [user, total] : user_totals_) out.push_back(user);
  return out;
}

Window WindowPool::sample_from(const std::vector<RecRef>& recs,
                               std::size_t total,
                               std::mt19937_64& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::size_t u = pick(rng);
  for (const auto& ref : recs) {
    if (u < ref.positions) return window_at(*ref.rec, u, T_);
    u -= ref.positions;
  }
  // Unreachable when totals are consistent.
  throw std::logic_error("WindowPool: inconsistent position totals");
}

Window WindowPool::sample_any(std::mt19937_64& rng) const {
  return sample_from(recs_, total_positions_, rng);
}

Window WindowPool::sample_from_user(const std::string& user_id,
                                    std::mt19937_64& rng) const {
  auto it = by_user_.find(user_id);
  if (it == by_user_.end()) {
    throw DataError("WindowPool: no windows available for user '" + user_id +
                    "'");
  }
  return sample_from(it->second, user_totals_.at(user_id), rng);
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

double synth_stride_velocity(double effective_freq_hz) {
  return 0.45 * effective_freq_hz;
}

double synth_double_support_time(double effective_freq_hz) {
  return 0.6 - 0.05 * effective_freq_hz;
}

namespace {

struct HarmonicParams {
  double amp;
  double phase;
  std::array<double, 3> dir;
};

// Short per-cycle burst (heel-strike-like transient) at a fixed phase of the
// gait cycle.
struct BurstParams {
  double amp;
  double phase_frac;  // position within the cycle, [0,1)
  double width_frac;  // gaussian width as a fraction of the cycle
  std::array<double, 3> dir;
};

struct MotifParams {
  std::array<HarmonicParams, 3> harmonics;
  std::vector<BurstParams> bursts;
  double env_rate;   // envelope frequency as a fraction of the base freq
  double env_depth;
  double env_phase;
};

std::array<double, 3> draw_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (true) {
    std::array<double, 3> v{gauss(rng), gauss(rng), gauss(rng)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-8) {
      for (auto& x : v) x /= n;
      return v;
    }
  }
}

MotifParams motif_params(const SyntheticSpec& spec, int cls, int motif) {
  auto class_rng = seeded_stream(spec.seed, "c", cls);
  std::uniform_real_distribution<double> amp_dist(0.35, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
  std::uniform_real_distribution<double> env_rate_dist(0.08, 0.2);
  std::uniform_real_distribution<double> env_depth_dist(0.2, 0.45);

  MotifParams base;
  for (int h = 0; h < 3; ++h) {
    base.harmonics[static_cast<std::size_t>(h)] = {
        amp_dist(class_rng), phase_dist(class_rng), draw_unit(class_rng)};
  }
  // Class-specific spectral signature: emphasize one harmonic per class.
  const int emphasized = cls % 3;
  base.harmonics[static_cast<std::size_t>(emphasized)].amp *=
      1.0 + 0.8 * spec.class_sep;
  base.env_rate = env_rate_dist(class_rng);
  base.env_depth = env_depth_dist(class_rng);
  base.env_phase = phase_dist(class_rng);

  // Per-cycle transient bursts with class-specific count, timing and width
  // (the impact-like landmarks that make motions recognizable).
  std::uniform_real_distribution<double> burst_amp(1.2, 1.9);
  std::uniform_real_distribution<double> burst_phase(0.0, 1.0);
  std::uniform_real_distribution<double> burst_width(0.035, 0.07);
  const int n_bursts = 1 + cls % 2;
  for (int b = 0; b < n_bursts; ++b) {
    BurstParams bp;
    bp.amp = burst_amp(class_rng) * spec.class_sep;
    bp.phase_frac = burst_phase(class_rng);
    bp.width_frac = burst_width(class_rng) * (1.0 + 0.4 * (cls % 3));
    bp.dir = draw_unit(class_rng);
    base.bursts.push_back(bp);
  }

  // Small per-motif perturbation keeps within-class templates close.
  auto motif_rng = seeded_stream(spec.seed, "m", cls, motif);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& h : base.harmonics) {
    h.amp *= 1.0 + 0.12 * unit(motif_rng);
    h.phase += 0.25 * unit(motif_rng);
  }
  for (auto& b : base.bursts) {
    b.amp *= 1.0 + 0.12 * unit(motif_rng);
    b.phase_frac += 0.03 * unit(motif_rng);
  }
  base.env_phase += 0.25 * unit(motif_rng);
  return base;
}

std::array<double, 3> eval_motif(const MotifParams& mp, double freq_hz,
                                 double t_sec) {
  const double env =
      1.0 + mp.env_depth *
                std::sin(kTwoPi * mp.env_rate * freq_hz * t_sec + mp.env_phase);
  std::array<double, 3> out{0.0, 0.0, 0.0};
  for (int h = 0; h < 3; ++h) {
    const auto& hp = mp.harmonics[static_cast<std::size_t>(h)];
    const double s =
        hp.amp * std::sin(kTwoPi * freq_hz * (h + 1) * t_sec + hp.phase);
    for (std::size_t c = 0; c < 3; ++c) out[c] += s * hp.dir[c];
  }
  const double cycle_pos = freq_hz * t_sec - std::floor(freq_hz * t_sec);
  for (const auto& bp : mp.bursts) {
    double delta = cycle_pos - bp.phase_frac;
    delta -= std::round(delta);  // wrap to [-0.5, 0.5)
    const double s =
        bp.amp * std::exp(-0.5 * delta * delta / (bp.width_frac * bp.width_frac));
    for (std::size_t c = 0; c < 3; ++c) out[c] += s * bp.dir[c];
  }
  for (auto& x : out) x *= env;
  return out;
}

std::array<std::array<double, 3>, 3> rotation_matrix(
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

}  // namespace

std::vector<double> synth_class_template(const SyntheticSpec& spec, int cls,
                                         int motif, std::size_t n_samples) {
  const MotifParams mp = motif_params(spec, cls, motif);
  const double freq = spec.base_freq_hz + cls * spec.freq_step_hz;
  std::vector<double> out(n_samples * 3);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate_hz;
    const auto v = eval_motif(mp, freq, t);
    for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = v[c];
  }
  return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_users < 1 || spec.n_classes < 1 || spec.motifs_per_class < 1 ||
      spec.recordings_per_user_class < 1) {
    throw ConfigError("generate_synthetic: counts must be positive");
  }
  if (!(spec.class_sep > 0.0)) {
    throw ConfigError(
        "generate_synthetic: class_sep must be > 0 (degenerate spec)");
  }
  if (!(spec.sample_rate_hz > 0.0) || spec.samples_per_recording == 0) {
    throw ConfigError("generate_synthetic: invalid sampling parameters");
  }
  if (!(spec.user_tempo_min > 0.0) ||
      spec.user_tempo_max < spec.user_tempo_min) {
    throw ConfigError("generate_synthetic: invalid tempo range");
  }

  Dataset ds;
  ds.sample_rate_hz = spec.sample_rate_hz;
  for (int c = 0; c < spec.n_classes; ++c) {
    ds.label_names.push_back("class_" + std::to_string(c));
  }

  // Motif banks shared across users (and across generator calls with the
  // same seed, regardless of user_index_offset).
  std::vector<std::vector<MotifParams>> banks(
      static_cast<std::size_t>(spec.n_classes));
  for (int c = 0; c < spec.n_classes; ++c) {
    for (int m = 0; m < spec.motifs_per_class; ++m) {
      banks[static_cast<std::size_t>(c)].push_back(motif_params(spec, c, m));
    }
  }

  for (int u = 0; u < spec.n_users; ++u) {
    const int gu = u + spec.user_index_offset;
    auto user_rng = seeded_stream(spec.seed, "u", gu);
    std::uniform_real_distribution<double> tempo_dist(spec.user_tempo_min,
                                                      spec.user_tempo_max);
    std::uniform_real_distribution<double> amp_dist(spec.user_amp_min,
                                                    spec.user_amp_max);
    std::uniform_real_distribution<double> angle_dist(
        0.0, spec.user_rotation_max_rad);
    std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);

    const double tempo = tempo_dist(user_rng);
    const double amp = amp_dist(user_rng);
    const auto rot_axis = draw_unit(user_rng);
    const double rot_angle = angle_dist(user_rng);
    const auto R = rotation_matrix(rot_axis, rot_angle);
    const double user_phase = phase_dist(user_rng);

    char user_name[32];
    std::snprintf(user_name, sizeof(user_name), "user_%03d", gu);

    for (int c = 0; c < spec.n_classes; ++c) {
      const double freq = (spec.base_freq_hz + c * spec.freq_step_hz) * tempo;
      for (int r = 0; r < spec.recordings_per_user_class; ++r) {
        auto rec_rng = seeded_stream(spec.seed, "r", gu, c, r);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        std::uniform_real_distribution<double> t0_dist(0.0, 4.0);
        const double t0 = t0_dist(rec_rng) + user_phase;
        const MotifParams& mp = banks[static_cast<std::size_t>(c)]
                                     [static_cast<std::size_t>(
                                         r % spec.motifs_per_class)];

        Recording rec;
        rec.user_id = user_name;
        char rec_name[64];
        std::snprintf(rec_name, sizeof(rec_name), "u%03d_c%d_r%d", gu, c, r);
        rec.recording_id = rec_name;
        rec.sample_rate_hz = spec.sample_rate_hz;
        rec.samples.resize(spec.samples_per_recording * 3);
        rec.labels.assign(spec.samples_per_recording, c);
        rec.targets["stride_velocity"] = synth_stride_velocity(freq);
        rec.targets["double_support_time"] = synth_double_support_time(freq);
        rec.targets["effective_freq_hz"] = freq;

        for (std::size_t i = 0; i < spec.samples_per_recording; ++i) {
          const double t = static_cast<double>(i) / spec.sample_rate_hz + t0;
          const auto v = eval_motif(mp, freq, t);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const double rotated = R[ch][0] * v[0] + R[ch][1] * v[1] +
                                   R[ch][2] * v[2];
            rec.samples[i * 3 + ch] = amp * rotated + noise(rec_rng);
          }
        }
        ds.recordings.push_back(std::move(rec));
      }
    }
  }

  ds.splits = split_by_user(ds, spec.split_ratios, spec.seed ^ 0xa5a5a5a5ull);
  return ds;
}

}  // namespace relcon
