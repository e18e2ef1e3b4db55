#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace icnr::cli {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kTrainingFailure = 3;
constexpr int kCorruptArtifact = 4;

using Path = std::filesystem::path;

// Writes `out` (rawbin int16) plus sidecars out.gt, out.stim.csv, out.labels.csv, out.atlas.bin, out.mask.bin.
int cmd_synth(const Path& config, const Path& out, std::ostream& log);

// mask: explicit mask file; otherwise mask.path from the config, otherwise auto_mask.
int cmd_compress(const Path& in, const Path& config, const Path& out, std::ostream& log,
                 const std::optional<Path>& mask = std::nullopt);

int cmd_decompress(const Path& artifact, const Path& out, std::ostream& log);

struct EvalFiles {
  Path original, decompressed;
  std::optional<Path> mask, stimulus_csv, labels_csv, atlas, artifact, config;
};
int cmd_eval(const EvalFiles& files, const Path& out, std::ostream& log);

int cmd_report(const std::string& reports_glob, const Path& out_dir, std::ostream& log);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace icnr::cli
