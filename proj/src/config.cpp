#include "icnr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "icnr/error.hpp"

namespace icnr {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::Config, "config field '" + field + "': " + what);
}

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) bad(where.empty() ? "<root>" : where, "must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) bad(where.empty() ? key : where + "." + key, "unknown key");
  }
}

template <typename T>
void read(const YAML::Node& node, const std::string& key, const std::string& where, T& out) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    bad(where + "." + key, "has the wrong type");
  }
}

void read_seed(const YAML::Node& node, const std::string& key, const std::string& where, std::uint64_t& out) {
  if (!node[key]) return;
  long long v = 0;
  try {
    v = node[key].as<long long>();
  } catch (const YAML::Exception&) {
    bad(where.empty() ? key : where + "." + key, "must be an integer");
  }
  if (v < 0) bad(where.empty() ? key : where + "." + key, "must be >= 0");
  out = std::uint64_t(v);
}

void rethrow_as_field(const Error& e, const std::string& section) {
  std::string msg = e.what();
  // Validators name fields like "train.lr"; keep those, otherwise prefix the section.
  if (msg.find(section + ".") == std::string::npos) msg = section + ": " + msg;
  throw Error(ErrorKind::Config, "config field " + msg);
}

}  // namespace

void RunConfig::validate() const {
  const Dims4& d = synth.dims;
  if (d.w < 1) bad("synth.dims", "W must be >= 1");
  if (d.h < 1) bad("synth.dims", "H must be >= 1");
  if (d.d < 1) bad("synth.dims", "D must be >= 1");
  if (d.t < 1) bad("synth.dims", "T must be >= 1");
  if (synth.n_stimuli < 1) bad("synth.n_stimuli", "must be >= 1");
  if (synth.n_regions < 1) bad("synth.n_regions", "must be >= 1");
  if (synth.events < 1) bad("synth.events", "must be >= 1");
  if (synth.duration < 1) bad("synth.duration", "must be >= 1");
  if (!(synth.int16_gain > 0)) bad("synth.int16_gain", "must be > 0");
  if (!(synth.shape.blob_radius > 0)) bad("synth.blob_radius", "must be > 0");
  if (synth.label_class_a == synth.label_class_b) bad("synth.label_classes", "classes must differ");
  if (synth.label_class_a < 0 || synth.label_class_b < 0 || synth.label_class_a >= synth.n_stimuli ||
      synth.label_class_b >= synth.n_stimuli)
    bad("synth.label_classes", "must index stimuli");
  try {
    synth.hrf.validate();
  } catch (const Error& e) {
    rethrow_as_field(e, "synth.hrf");
  }
  try {
    compress.model.validate();
  } catch (const Error& e) {
    rethrow_as_field(e, "model");
  }
  try {
    compress.train.validate();
  } catch (const Error& e) {
    rethrow_as_field(e, "train");
  }
  try {
    compress.codec.validate();
  } catch (const Error& e) {
    rethrow_as_field(e, "codec");
  }
  if (!(compress.ica.tol > 0)) bad("ica.tol", "must be > 0");
  if (compress.ica.max_iter < 1) bad("ica.max_iter", "must be >= 1");
  if (!(mask_threshold > 0 && mask_threshold < 1)) bad("mask.rel_threshold", "must lie in (0, 1)");
  if (folds < 2) bad("eval.folds", "must be >= 2");
}

RunConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Config, std::string("config is not valid YAML: ") + e.what());
  }
  RunConfig cfg;
  if (root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  check_keys(root, "", {"seed", "synth", "model", "train", "ica", "codec", "mask", "eval"});
  read_seed(root, "seed", "", cfg.seed);
  cfg.compress.train.seed = cfg.seed;
  cfg.compress.ica.seed = cfg.seed;

  if (const YAML::Node s = root["synth"]) {
    check_keys(s, "synth", {"dims", "n_stimuli", "n_regions", "snr_db", "events", "duration", "int16_gain",
                            "label_classes", "blob_radius", "center_jitter", "bump_floor", "cross_loading",
                            "amplitude", "hrf"});
    SynthConfig& sc = cfg.synth;
    if (s["dims"]) {
      std::vector<int> dims;
      try {
        dims = s["dims"].as<std::vector<int>>();
      } catch (const YAML::Exception&) {
        bad("synth.dims", "must be a list of 4 integers");
      }
      if (dims.size() != 4) bad("synth.dims", "must be a list of 4 integers");
      sc.dims = {dims[0], dims[1], dims[2], dims[3]};
    }
    read(s, "n_stimuli", "synth", sc.n_stimuli);
    read(s, "n_regions", "synth", sc.n_regions);
    if (s["snr_db"] && s["snr_db"].IsScalar() && s["snr_db"].as<std::string>() == "inf") sc.snr_db = kNoiseless;
    else read(s, "snr_db", "synth", sc.snr_db);
    read(s, "events", "synth", sc.events);
    read(s, "duration", "synth", sc.duration);
    read(s, "int16_gain", "synth", sc.int16_gain);
    if (s["label_classes"]) {
      std::vector<int> lc;
      try {
        lc = s["label_classes"].as<std::vector<int>>();
      } catch (const YAML::Exception&) {
        bad("synth.label_classes", "must be a list of 2 integers");
      }
      if (lc.size() != 2) bad("synth.label_classes", "must be a list of 2 integers");
      sc.label_class_a = lc[0];
      sc.label_class_b = lc[1];
    }
    read(s, "blob_radius", "synth", sc.shape.blob_radius);
    read(s, "center_jitter", "synth", sc.shape.center_jitter);
    read(s, "bump_floor", "synth", sc.shape.bump_floor);
    read(s, "cross_loading", "synth", sc.shape.cross_loading);
    read(s, "amplitude", "synth", sc.shape.amplitude);
    if (const YAML::Node h = s["hrf"]) {
      check_keys(h, "synth.hrf", {"peak_delay", "undershoot_delay", "peak_disp", "undershoot_disp", "ratio", "tr",
                                  "length_s"});
      read(h, "peak_delay", "synth.hrf", sc.hrf.peak_delay);
      read(h, "undershoot_delay", "synth.hrf", sc.hrf.undershoot_delay);
      read(h, "peak_disp", "synth.hrf", sc.hrf.peak_disp);
      read(h, "undershoot_disp", "synth.hrf", sc.hrf.undershoot_disp);
      read(h, "ratio", "synth.hrf", sc.hrf.ratio);
      read(h, "tr", "synth.hrf", sc.hrf.tr);
      read(h, "length_s", "synth.hrf", sc.hrf.length_s);
    }
  }

  if (const YAML::Node m = root["model"]) {
    check_keys(m, "model", {"K", "embed_freqs", "mlp_layers", "mlp_width", "feat_channels", "fusion_levels",
                            "fusion_width", "fusion", "encoder_activation", "zero_init_output"});
    ModelConfig& mc = cfg.compress.model;
    read(m, "K", "model", mc.K);
    read(m, "embed_freqs", "model", mc.embed_freqs);
    read(m, "mlp_layers", "model", mc.mlp_layers);
    read(m, "mlp_width", "model", mc.mlp_width);
    read(m, "feat_channels", "model", mc.feat_channels);
    read(m, "fusion_levels", "model", mc.fusion_levels);
    read(m, "fusion_width", "model", mc.fusion_width);
    read(m, "fusion", "model", mc.fusion);
    read(m, "zero_init_output", "model", mc.zero_init_output);
    if (m["encoder_activation"]) {
      std::string a;
      read(m, "encoder_activation", "model", a);
      if (a == "gelu") mc.encoder_activation = nn::Activation::Gelu;
      else if (a == "identity") mc.encoder_activation = nn::Activation::Identity;
      else bad("model.encoder_activation", "must be gelu or identity");
    }
  }

  if (const YAML::Node t = root["train"]) {
    check_keys(t, "train", {"lr", "epochs", "pretrain_epochs", "pretrain_lr", "batch_voxels", "ssim_weight",
                            "seed", "chunk_len", "metrics_log", "init"});
    TrainConfig& tc = cfg.compress.train;
    read(t, "lr", "train", tc.lr);
    read(t, "epochs", "train", tc.epochs);
    read(t, "pretrain_epochs", "train", tc.pretrain_epochs);
    read(t, "pretrain_lr", "train", tc.pretrain_lr);
    read(t, "batch_voxels", "train", tc.batch_voxels);
    read(t, "ssim_weight", "train", tc.ssim_weight);
    read_seed(t, "seed", "train", tc.seed);
    if (t["chunk_len"] && !t["chunk_len"].IsNull()) {
      int c = 0;
      read(t, "chunk_len", "train", c);
      tc.chunk_len = c;
    }
    read(t, "metrics_log", "train", tc.metrics_log);
    if (t["init"]) {
      std::string init;
      read(t, "init", "train", init);
      if (init == "ica") cfg.compress.init = BankInit::Ica;
      else if (init == "uniform") cfg.compress.init = BankInit::Uniform;
      else if (init == "normal") cfg.compress.init = BankInit::Normal;
      else bad("train.init", "must be ica, uniform or normal");
    }
  }

  if (const YAML::Node i = root["ica"]) {
    check_keys(i, "ica", {"tol", "max_iter", "seed"});
    read(i, "tol", "ica", cfg.compress.ica.tol);
    read(i, "max_iter", "ica", cfg.compress.ica.max_iter);
    read_seed(i, "seed", "ica", cfg.compress.ica.seed);
  }

  if (const YAML::Node c = root["codec"]) {
    check_keys(c, "codec", {"bits", "mean_lossless", "mean_quality"});
    read(c, "bits", "codec", cfg.compress.codec.bits);
    read(c, "mean_lossless", "codec", cfg.compress.codec.mean_lossless);
    read(c, "mean_quality", "codec", cfg.compress.codec.mean_quality);
  }

  if (const YAML::Node m = root["mask"]) {
    check_keys(m, "mask", {"path", "rel_threshold"});
    if (m["path"] && !m["path"].IsNull()) {
      std::string p;
      read(m, "path", "mask", p);
      cfg.mask_path = p;
    }
    read(m, "rel_threshold", "mask", cfg.mask_threshold);
  }

  if (const YAML::Node e = root["eval"]) {
    check_keys(e, "eval", {"folds"});
    read(e, "folds", "eval", cfg.folds);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  // Relative mask paths resolve against the config file.
  if (cfg.mask_path && cfg.mask_path->is_relative()) cfg.mask_path = path.parent_path() / *cfg.mask_path;
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  YAML::Emitter out;
  const auto& s = cfg.synth;
  const auto& m = cfg.compress.model;
  const auto& t = cfg.compress.train;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "synth" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dims" << YAML::Value << YAML::Flow << std::vector<int>{s.dims.w, s.dims.h, s.dims.d, s.dims.t};
  out << YAML::Key << "n_stimuli" << YAML::Value << s.n_stimuli;
  out << YAML::Key << "n_regions" << YAML::Value << s.n_regions;
  if (s.snr_db == kNoiseless) out << YAML::Key << "snr_db" << YAML::Value << "inf";
  else out << YAML::Key << "snr_db" << YAML::Value << s.snr_db;
  out << YAML::Key << "events" << YAML::Value << s.events;
  out << YAML::Key << "duration" << YAML::Value << s.duration;
  out << YAML::Key << "int16_gain" << YAML::Value << s.int16_gain;
  out << YAML::Key << "label_classes" << YAML::Value << YAML::Flow << std::vector<int>{s.label_class_a, s.label_class_b};
  out << YAML::Key << "blob_radius" << YAML::Value << s.shape.blob_radius;
  out << YAML::Key << "center_jitter" << YAML::Value << s.shape.center_jitter;
  out << YAML::Key << "bump_floor" << YAML::Value << s.shape.bump_floor;
  out << YAML::Key << "cross_loading" << YAML::Value << s.shape.cross_loading;
  out << YAML::Key << "amplitude" << YAML::Value << s.shape.amplitude;
  out << YAML::Key << "hrf" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "peak_delay" << YAML::Value << s.hrf.peak_delay;
  out << YAML::Key << "undershoot_delay" << YAML::Value << s.hrf.undershoot_delay;
  out << YAML::Key << "peak_disp" << YAML::Value << s.hrf.peak_disp;
  out << YAML::Key << "undershoot_disp" << YAML::Value << s.hrf.undershoot_disp;
  out << YAML::Key << "ratio" << YAML::Value << s.hrf.ratio;
  out << YAML::Key << "tr" << YAML::Value << s.hrf.tr;
  out << YAML::Key << "length_s" << YAML::Value << s.hrf.length_s;
  out << YAML::EndMap << YAML::EndMap;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "K" << YAML::Value << m.K;
  out << YAML::Key << "embed_freqs" << YAML::Value << m.embed_freqs;
  out << YAML::Key << "mlp_layers" << YAML::Value << m.mlp_layers;
  out << YAML::Key << "mlp_width" << YAML::Value << m.mlp_width;
  out << YAML::Key << "feat_channels" << YAML::Value << m.feat_channels;
  out << YAML::Key << "fusion_levels" << YAML::Value << m.fusion_levels;
  out << YAML::Key << "fusion_width" << YAML::Value << m.fusion_width;
  out << YAML::Key << "fusion" << YAML::Value << m.fusion;
  out << YAML::Key << "encoder_activation" << YAML::Value
      << (m.encoder_activation == nn::Activation::Gelu ? "gelu" : "identity");
  out << YAML::Key << "zero_init_output" << YAML::Value << m.zero_init_output;
  out << YAML::EndMap;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lr" << YAML::Value << t.lr;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "pretrain_epochs" << YAML::Value << t.pretrain_epochs;
  out << YAML::Key << "pretrain_lr" << YAML::Value << t.pretrain_lr;
  out << YAML::Key << "batch_voxels" << YAML::Value << t.batch_voxels;
  out << YAML::Key << "ssim_weight" << YAML::Value << t.ssim_weight;
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  if (t.chunk_len) out << YAML::Key << "chunk_len" << YAML::Value << *t.chunk_len;
  out << YAML::Key << "metrics_log" << YAML::Value << t.metrics_log;
  const char* init = cfg.compress.init == BankInit::Ica ? "ica" : cfg.compress.init == BankInit::Uniform ? "uniform" : "normal";
  out << YAML::Key << "init" << YAML::Value << init;
  out << YAML::EndMap;
  out << YAML::Key << "ica" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tol" << YAML::Value << cfg.compress.ica.tol;
  out << YAML::Key << "max_iter" << YAML::Value << cfg.compress.ica.max_iter;
  out << YAML::Key << "seed" << YAML::Value << cfg.compress.ica.seed;
  out << YAML::EndMap;
  out << YAML::Key << "codec" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "bits" << YAML::Value << cfg.compress.codec.bits;
  out << YAML::Key << "mean_lossless" << YAML::Value << cfg.compress.codec.mean_lossless;
  out << YAML::Key << "mean_quality" << YAML::Value << cfg.compress.codec.mean_quality;
  out << YAML::EndMap;
  out << YAML::Key << "mask" << YAML::Value << YAML::BeginMap;
  if (cfg.mask_path) out << YAML::Key << "path" << YAML::Value << cfg.mask_path->string();
  out << YAML::Key << "rel_threshold" << YAML::Value << cfg.mask_threshold;
  out << YAML::EndMap;
  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap << YAML::Key << "folds" << YAML::Value << cfg.folds
      << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace icnr
