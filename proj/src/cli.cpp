#include "icnr/cli.hpp"

#include <glob.h>

#include <fstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "icnr/bytes.hpp"
#include "icnr/config.hpp"
#include "icnr/error.hpp"
#include "icnr/eval.hpp"
#include "icnr/pipeline.hpp"
#include "icnr/report.hpp"
#include "icnr/synth.hpp"

namespace icnr::cli {

namespace {

int exit_code(const Error& e, bool artifact_input) {
  switch (e.kind()) {
    case ErrorKind::Config: return kConfigError;
    case ErrorKind::NonFiniteLoss: return kTrainingFailure;
    case ErrorKind::CorruptStream:
    case ErrorKind::ChecksumMismatch:
    case ErrorKind::VersionUnsupported: return artifact_input ? kCorruptArtifact : kFailure;
    default: return kFailure;
  }
}

template <typename F>
int guarded(std::ostream& log, bool artifact_input, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code(e, artifact_input);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kFailure;
  }
}

Path sidecar(const Path& out, const std::string& suffix) { return Path(out.string() + suffix); }

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  return out;  // glob sorts its matches
}

}  // namespace

int cmd_synth(const Path& config, const Path& out, std::ostream& log) {
  return guarded(log, false, [&] {
    const RunConfig cfg = load_config(config);
    const SynthConfig& s = cfg.synth;
    const StimulusSpec stim = make_event_design(s.n_stimuli, s.dims.t, s.events, s.duration, cfg.seed);
    const SynthResult r = generate(s.dims, stim, s.hrf, s.n_regions, s.snr_db, cfg.seed, s.shape);
    const Volume4D vol = to_int16_units(r.volume, s.int16_gain);
    save_rawbin(vol, out, DType::Int16);
    save_ground_truth(r.truth, sidecar(out, ".gt"));
    save_stimulus_csv(stim, sidecar(out, ".stim.csv"));
    save_labels_csv(frame_labels(r.truth.patterns, s.label_class_a, s.label_class_b), sidecar(out, ".labels.csv"));
    save_labels(r.truth.region_labels, sidecar(out, ".atlas.bin"));
    std::vector<std::uint8_t> m(r.truth.region_labels.data.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = r.truth.region_labels.data[i] >= 0;
    const Mask3D mask(s.dims.spatial(), std::move(m));
    save_mask(mask, sidecar(out, ".mask.bin"));
    log << "synth: " << s.dims.w << "x" << s.dims.h << "x" << s.dims.d << "x" << s.dims.t << ", " << s.n_regions
        << " regions, " << mask.count() << " masked voxels, noise sigma " << r.truth.noise_sigma << " -> " << out.string()
        << "\n";
    return kOk;
  });
}

int cmd_compress(const Path& in, const Path& config, const Path& out, std::ostream& log,
                 const std::optional<Path>& mask_path) {
  return guarded(log, false, [&] {
    const RunConfig cfg = load_config(config);
    const Volume4D vol = load_volume(in);
    Mask3D mask;
    if (mask_path) mask = load_mask(*mask_path);
    else if (cfg.mask_path) mask = load_mask(*cfg.mask_path);
    else mask = auto_mask(vol, cfg.mask_threshold);
    const CompressResult r = compress_volume(vol, mask, cfg.compress);
    write_file(out, r.bytes);
    log << "compress: " << r.ratio.artifact_bytes << " bytes, ratio " << r.ratio.ratio << "x, psnr " << r.psnr
        << " dB over " << r.chunks.size() << " chunk(s)\n";
    return kOk;
  });
}

int cmd_decompress(const Path& artifact, const Path& out, std::ostream& log) {
  return guarded(log, true, [&] {
    const Artifact a = unpack(read_file(artifact));
    const Volume4D vol = decompress(a);
    save_rawbin(vol, out, a.source_dtype == DType::Int16 ? DType::Int16 : DType::Float32);
    log << "decompress: " << vol.dims().w << "x" << vol.dims().h << "x" << vol.dims().d << "x" << vol.dims().t
        << " -> " << out.string() << "\n";
    return kOk;
  });
}

int cmd_eval(const EvalFiles& files, const Path& out, std::ostream& log) {
  return guarded(log, true, [&] {
    const Volume4D a = load_volume(files.original);
    const Volume4D b = load_volume(files.decompressed);
    EvalContext ctx;
    if (files.config) {
      const RunConfig cfg = load_config(*files.config);
      ctx.hrf = cfg.synth.hrf;
      ctx.folds = cfg.folds;
      ctx.seed = cfg.seed;
    }
    if (files.mask) ctx.mask = load_mask(*files.mask);
    if (files.atlas) ctx.atlas = load_labels(*files.atlas);
    // Optional tables that are named but absent only skip their metric.
    if (files.stimulus_csv) {
      if (std::filesystem::exists(*files.stimulus_csv)) ctx.stimulus = load_stimulus_csv(*files.stimulus_csv, a.dims().t);
      else log << "eval: stimulus table " << files.stimulus_csv->string() << " missing\n";
    }
    if (files.labels_csv) {
      if (std::filesystem::exists(*files.labels_csv)) ctx.frame_labels = load_labels_csv(*files.labels_csv, a.dims().t);
      else log << "eval: label table " << files.labels_csv->string() << " missing\n";
    }
    if (files.artifact) {
      const auto bytes = read_file(*files.artifact);
      const Artifact art = unpack(bytes);
      ctx.ratio = compression_ratio(art.dims, art.source_dtype, bytes.size()).ratio;
    }
    const EvalReport report = evaluate_pair(a, b, ctx);
    const nlohmann::json j = report.to_json();
    validate_report_json(j);
    std::ofstream o(out, std::ios::binary);
    if (!o) throw Error(ErrorKind::Io, "cannot write " + out.string());
    o << j.dump(2) << "\n";
    log << "eval: psnr " << report.psnr << " dB";
    if (report.ssim) log << ", ssim " << *report.ssim;
    for (const auto& [metric, reason] : report.skipped) log << "; " << metric << " skipped (" << reason << ")";
    log << "\n";
    return kOk;
  });
}

int cmd_report(const std::string& reports_glob, const Path& out_dir, std::ostream& log) {
  return guarded(log, false, [&] {
    const std::vector<std::string> files = expand_glob(reports_glob);
    if (files.empty()) throw Error(ErrorKind::Config, "reports glob '" + reports_glob + "' matched nothing");
    std::vector<RdPoint> points;
    for (const auto& f : files) {
      std::ifstream in(f);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, f + " is not valid JSON: " + e.what());
      }
      validate_report_json(j);
      points.push_back({Path(f).stem().string(), EvalReport::from_json(j)});
    }
    const Path svg = write_rd_plots(points, out_dir);
    log << "report: " << points.size() << " report(s) -> " << svg.string() << "\n";
    return kOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"icnr: fMRI compression with an ICA-initialised implicit neural representation"};
  app.require_subcommand(1);

  std::string config, in, output, mask, reports, dir;
  EvalFiles ef;
  std::string e_mask, e_stim, e_labels, e_atlas, e_artifact, e_config;

  auto* synth = app.add_subcommand("synth", "generate a phantom volume and its ground truth");
  synth->add_option("-c,--config", config, "YAML run config")->required();
  synth->add_option("-o,--out", output, "output rawbin volume")->required();

  auto* comp = app.add_subcommand("compress", "fit and pack a volume");
  comp->add_option("-i,--in", in, "input volume (.nii or rawbin)")->required();
  comp->add_option("-c,--config", config, "YAML run config")->required();
  comp->add_option("-o,--out", output, "output artifact")->required();
  comp->add_option("-m,--mask", mask, "mask file (overrides mask.path)");

  auto* dec = app.add_subcommand("decompress", "rebuild a volume from an artifact");
  dec->add_option("-i,--in", in, "artifact")->required();
  dec->add_option("-o,--out", output, "output rawbin volume")->required();

  auto* ev = app.add_subcommand("eval", "score a decompressed volume against the original");
  std::string e_orig, e_dec;
  ev->add_option("--original", e_orig, "original volume")->required();
  ev->add_option("--decompressed", e_dec, "decompressed volume")->required();
  ev->add_option("--mask", e_mask, "mask file");
  ev->add_option("--stimulus", e_stim, "stimulus CSV (onset,duration,stimulus_id)");
  ev->add_option("--labels", e_labels, "frame label CSV (frame_index,label)");
  ev->add_option("--atlas", e_atlas, "atlas label volume");
  ev->add_option("--artifact", e_artifact, "artifact, for the ratio");
  ev->add_option("-c,--config", e_config, "run config (hrf, folds, seed)");
  ev->add_option("-o,--out", output, "output JSON report")->required();

  auto* rep = app.add_subcommand("report", "rate-distortion plots from eval reports");
  rep->add_option("-r,--reports", reports, "glob of report JSON files")->required();
  rep->add_option("-o,--out", dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  auto opt = [](const std::string& s) { return s.empty() ? std::optional<Path>{} : std::optional<Path>{s}; };
  if (*synth) return cmd_synth(config, output, err);
  if (*comp) return cmd_compress(in, config, output, err, opt(mask));
  if (*dec) return cmd_decompress(in, output, err);
  if (*ev) {
    ef.original = e_orig;
    ef.decompressed = e_dec;
    ef.mask = opt(e_mask);
    ef.stimulus_csv = opt(e_stim);
    ef.labels_csv = opt(e_labels);
    ef.atlas = opt(e_atlas);
    ef.artifact = opt(e_artifact);
    ef.config = opt(e_config);
    return cmd_eval(ef, output, err);
  }
  if (*rep) return cmd_report(reports, dir, err);
  return kFailure;
}

}  // namespace icnr::cli
