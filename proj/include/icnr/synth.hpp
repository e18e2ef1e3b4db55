#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "icnr/volume.hpp"

namespace icnr {

// Event table per stimulus: onsets[i][j] starts an event of durations[i][j] frames.
struct StimulusSpec {
  int n_stimuli = 0;
  std::vector<std::vector<int>> onsets;
  std::vector<std::vector<int>> durations;
  int T = 0;

  void validate() const;
};

// Double-gamma hemodynamic response; delays in seconds, tr in seconds per frame.
struct HrfParams {
  double peak_delay = 6.0;
  double undershoot_delay = 16.0;
  double peak_disp = 1.0;
  double undershoot_disp = 1.0;
  double ratio = 1.0 / 6.0;
  double tr = 2.0;
  double length_s = 32.0;

  void validate() const;
};

// Sampled kernel at t = k * tr, scaled so its largest sample is 1.
std::vector<double> hrf_kernel(const HrfParams& hrf);

// One row per stimulus: boxcar train convolved with the kernel, truncated to T.
Eigen::MatrixXd hrf_convolve(const StimulusSpec& stim, const HrfParams& hrf);

struct SynthOptions {
  double blob_radius = 0.6;     // fraction of half the smallest grid-cell edge
  double center_jitter = 0.15;  // fraction of the cell edge
  double bump_floor = 0.3;      // weight at the blob rim relative to its centre
  double cross_loading = 0.08;  // upper bound of non-dominant loadings
  double amplitude = 1.0;       // global scale of all weight maps
};

struct SynthGroundTruth {
  Eigen::MatrixXd patterns;                 // K_s x T
  std::vector<std::vector<float>> weight_maps;  // K_s maps, each W*H*D, x fastest
  LabelVolume region_labels;                // -1 outside every blob
  StimulusSpec stimulus;
  HrfParams hrf;
  double noise_sigma = 0.0;
  Volume4D clean;
};

constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct SynthResult {
  Volume4D volume;
  SynthGroundTruth truth;
};

SynthResult generate(Dims4 dims, const StimulusSpec& stim, const HrfParams& hrf, int n_regions,
                     double snr_db, std::uint64_t seed, const SynthOptions& opts = {});

// Random non-overlapping event design: every stimulus gets `events` events of
// `duration` frames placed in shuffled slots spread over the series.
StimulusSpec make_event_design(int n_stimuli, int T, int events, int duration, std::uint64_t seed);

// Frame labels for a two-class decoding task: frame t gets class c when
// stimulus c's response dominates (>= threshold of its peak, other below it);
// -1 otherwise.
std::vector<int> frame_labels(const Eigen::MatrixXd& patterns, int class_a, int class_b,
                              double threshold = 0.5);

// Sidecar with the ground truth. Layout documented in docs/format.md.
void save_ground_truth(const SynthGroundTruth& truth, const std::filesystem::path& path);
SynthGroundTruth load_ground_truth(const std::filesystem::path& path);

// Rescales by `gain`, rounds to int16 range and tags the volume as int16-sourced.
Volume4D to_int16_units(const Volume4D& vol, double gain);

void save_stimulus_csv(const StimulusSpec& stim, const std::filesystem::path& path);
StimulusSpec load_stimulus_csv(const std::filesystem::path& path, int T);
void save_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path);
// Frames missing from the file get -1.
std::vector<int> load_labels_csv(const std::filesystem::path& path, int T);

}  // namespace icnr
