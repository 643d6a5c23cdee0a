#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace relcon {

// One contiguous 3-axis accelerometry recording for a single user, plus
// optional per-sample class labels and per-recording continuous targets.
struct Recording {
  std::string user_id;
  std::string recording_id;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;  // N*3 row-major (t, axis)
  std::vector<int> labels;      // per-sample class ids; empty when unlabeled
  std::map<std::string, double> targets;  // per-recording continuous targets

  std::size_t length() const { return samples.size() / 3; }
};

// A T x 3 subsequence with provenance. `offset` is the sample index of the
// first row inside its recording.
struct Window {
  std::string user_id;
  std::string recording_id;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::vector<double> samples;  // T*3 row-major
  int label = -1;               // majority class id; -1 when unlabeled
  std::map<std::string, double> targets;

  std::string identity() const {
    return recording_id + "@" + std::to_string(offset);
  }
};

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);

// Participant-level split assignment: every user belongs to exactly one split.
struct SplitManifest {
  std::map<std::string, Split> by_user;

  Split of(const std::string& user_id) const;
  std::vector<std::string> users_in(Split s) const;
};

struct Dataset {
  double sample_rate_hz = 0.0;
  std::vector<Recording> recordings;
  std::vector<std::string> label_names;
  SplitManifest splits;  // may be empty when the manifest carries none
};

struct LoadReport {
  std::size_t recordings_loaded = 0;
  std::size_t skipped_short = 0;
  std::vector<std::string> warnings;
};

// Reads `dataset.json` plus per-recording CSVs (header t,x,y,z[,label]) from
// `root`. Recordings shorter than `min_length` samples are excluded and
// counted in the report. Malformed rows are rejected with line numbers.
Dataset load_csv_dataset(const std::string& root, std::size_t min_length = 0,
                         LoadReport* report = nullptr);

// Writes dataset.json and one CSV per recording under `root` (created if
// needed). Values are formatted with 17 significant digits so a load
// round-trips bit-exactly.
void save_csv_dataset(const Dataset& dataset, const std::string& root);

// Windows at offsets 0, stride, 2*stride, ... Each window inherits the
// majority per-sample label over its span and the recording targets.
std::vector<Window> make_windows(const Recording& rec, std::size_t T,
                                 std::size_t stride);

// All recordings; recordings shorter than T are skipped (counted if `report`
// is given).
std::vector<Window> make_windows(const Dataset& dataset, std::size_t T,
                                 std::size_t stride,
                                 LoadReport* report = nullptr);

// User-level random assignment into train/val/test. Ratios must sum to 1.
SplitManifest split_by_user(const Dataset& dataset,
                            const std::array<double, 3>& ratios,
                            std::uint64_t seed);

// The window starting at `offset` of a recording (labels/targets inherited).
Window window_at(const Recording& rec, std::size_t offset, std::size_t T);

// Uniform sampling over every valid (recording, offset) position, optionally
// restricted to one split's users. Used for pre-training anchor draws and
// within-user candidate draws.
class WindowPool {
 public:
  WindowPool(const Dataset& dataset, std::size_t T,
             const std::vector<std::string>& users = {});

  std::size_t window_length() const { return T_; }
  std::size_t total_positions() const { return total_positions_; }
  std::size_t user_positions(const std::string& user_id) const;
  std::vector<std::string> users() const;

  Window sample_any(std::mt19937_64& rng) const;
  Window sample_from_user(const std::string& user_id,
                          std::mt19937_64& rng) const;

 private:
  struct RecRef {
    const Recording* rec;
    std::size_t positions;
  };
  Window sample_from(const std::vector<RecRef>& recs, std::size_t total,
                     std::mt19937_64& rng) const;

  std::size_t T_;
  std::vector<RecRef> recs_;
  std::map<std::string, std::vector<RecRef>> by_user_;
  std::map<std::string, std::size_t> user_totals_;
  std::size_t total_positions_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic multi-user motif generator. Each class owns a bank of harmonic
// motif templates; users overlay idiosyncratic tempo, amplitude, phase and a
// fixed device-orientation rotation. Continuous targets are noiseless
// functions of the recording's effective frequency (class frequency x user
// tempo), so probes have a recoverable ceiling.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int n_users = 20;
  int n_classes = 5;
  int motifs_per_class = 2;
  int recordings_per_user_class = 3;
  std::size_t samples_per_recording = 320;
  double sample_rate_hz = 32.0;

  double base_freq_hz = 1.2;   // class c oscillates at base + c*step
  double freq_step_hz = 0.7;
  double class_sep = 1.0;      // distinguishability knob, must be > 0

  double user_tempo_min = 0.75;  // tempo multiplier range (drives targets)
  double user_tempo_max = 1.25;
  double user_amp_min = 0.8;
  double user_amp_max = 1.2;
  double user_rotation_max_rad = 3.14159265358979323846;
  double noise_sigma = 0.08;

  std::array<double, 3> split_ratios{0.5, 0.25, 0.25};
  int user_index_offset = 0;  // shifts user ids/idiosyncrasies for extra sets
  std::uint64_t seed = 7;
};

// Continuous target definitions shared by the generator and its tests.
double synth_stride_velocity(double effective_freq_hz);
double synth_double_support_time(double effective_freq_hz);

// The class-c motif template evaluated with unit tempo/amplitude and no
// user rotation; used for separability checks.
std::vector<double> synth_class_template(const SyntheticSpec& spec, int cls,
                                         int motif, std::size_t n_samples);

Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace relcon
