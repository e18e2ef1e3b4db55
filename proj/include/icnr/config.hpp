#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "icnr/pipeline.hpp"
#include "icnr/synth.hpp"

namespace icnr {

struct SynthConfig {
  Dims4 dims{16, 16, 8, 64};
  int n_stimuli = 4;
  int n_regions = 4;
  double snr_db = 20.0;
  int events = 3;
  int duration = 2;
  double int16_gain = 1000.0;
  int label_class_a = 0;
  int label_class_b = 1;
  SynthOptions shape{0.625, 0.15, 0.3, 0.08, 1.0};
  HrfParams hrf;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SynthConfig synth;
  CompressOptions compress;
  std::optional<std::filesystem::path> mask_path;
  double mask_threshold = 0.1;
  int folds = 10;

  void validate() const;
};

// Missing keys keep their defaults; unknown keys and bad values raise Error(Config) naming the field.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& yaml_text);
std::string dump_config(const RunConfig& cfg);

}  // namespace icnr
