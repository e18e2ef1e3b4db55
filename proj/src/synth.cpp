#include "icnr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "icnr/bytes.hpp"
#include "icnr/error.hpp"
#include "icnr/rng.hpp"

namespace icnr {

namespace {

double gamma_pdf(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  const double x = t / scale;
  return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape)) / scale;
}

std::array<int, 3> region_grid(Dims3 d, int n) {
  std::array<int, 3> g{1, 1, 1};
  const std::array<int, 3> extent{d.w, d.h, d.d};
  while (g[0] * g[1] * g[2] < n) {
    int best = 0;
    double best_cell = -1.0;
    for (int a = 0; a < 3; ++a) {
      if (g[a] >= extent[a]) continue;
      const double cell = double(extent[a]) / g[a];
      if (cell > best_cell) {
        best_cell = cell;
        best = a;
      }
    }
    if (best_cell < 0) break;
    ++g[best];
  }
  return g;
}

constexpr char kTruthMagic[4] = {'I', 'C', 'G', 'T'};

}  // namespace

void StimulusSpec::validate() const {
  if (n_stimuli < 0 || int(onsets.size()) != n_stimuli || int(durations.size()) != n_stimuli) {
    throw Error(ErrorKind::ShapeMismatch, "stimulus table does not match n_stimuli");
  }
  if (T <= 0) throw Error(ErrorKind::Config, "stimulus series length must be positive");
  for (int i = 0; i < n_stimuli; ++i) {
    if (onsets[i].size() != durations[i].size()) {
      throw Error(ErrorKind::ShapeMismatch, "onset/duration count mismatch for stimulus " + std::to_string(i));
    }
    for (std::size_t j = 0; j < onsets[i].size(); ++j) {
      if (onsets[i][j] < 0 || onsets[i][j] >= T) throw Error(ErrorKind::Config, "onset outside [0, T)");
      if (durations[i][j] < 1) throw Error(ErrorKind::Config, "event duration must be >= 1");
    }
  }
}

void HrfParams::validate() const {
  if (!(peak_delay > 0 && undershoot_delay > 0 && peak_disp > 0 && undershoot_disp > 0 && ratio > 0 &&
        tr > 0 && length_s > 0)) {
    throw Error(ErrorKind::Config, "HRF parameters must be positive");
  }
  if (!(peak_delay < undershoot_delay)) throw Error(ErrorKind::Config, "peak_delay must precede undershoot_delay");
}

std::vector<double> hrf_kernel(const HrfParams& hrf) {
  hrf.validate();
  const int n = int(std::ceil(hrf.length_s / hrf.tr)) + 1;
  std::vector<double> k(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const double t = i * hrf.tr;
    k[std::size_t(i)] = gamma_pdf(t, hrf.peak_delay / hrf.peak_disp, hrf.peak_disp) -
                        hrf.ratio * gamma_pdf(t, hrf.undershoot_delay / hrf.undershoot_disp, hrf.undershoot_disp);
  }
  const double peak = *std::max_element(k.begin(), k.end());
  for (double& v : k) v /= peak;
  return k;
}

Eigen::MatrixXd hrf_convolve(const StimulusSpec& stim, const HrfParams& hrf) {
  stim.validate();
  const std::vector<double> kernel = hrf_kernel(hrf);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(stim.n_stimuli, stim.T);
  for (int i = 0; i < stim.n_stimuli; ++i) {
    std::vector<double> boxcar(std::size_t(stim.T), 0.0);
    for (std::size_t j = 0; j < stim.onsets[i].size(); ++j) {
      const int end = std::min(stim.T, stim.onsets[i][j] + stim.durations[i][j]);
      for (int t = stim.onsets[i][j]; t < end; ++t) boxcar[std::size_t(t)] = 1.0;
    }
    for (int t = 0; t < stim.T; ++t) {
      if (boxcar[std::size_t(t)] == 0.0) continue;
      for (std::size_t k = 0; k < kernel.size() && t + int(k) < stim.T; ++k) {
        out(i, t + int(k)) += kernel[k];
      }
    }
  }
  return out;
}

SynthResult generate(Dims4 dims, const StimulusSpec& stim, const HrfParams& hrf, int n_regions,
                     double snr_db, std::uint64_t seed, const SynthOptions& opts) {
  if (dims.w <= 0 || dims.h <= 0 || dims.d <= 0 || dims.t <= 0) {
    throw Error(ErrorKind::Config, "dims must be positive");
  }
  if (n_regions < 1) throw Error(ErrorKind::Config, "n_regions must be >= 1");
  if (std::isnan(snr_db) || snr_db == -kNoiseless) throw Error(ErrorKind::Config, "snr_db must be finite or +inf");
  if (stim.T != dims.t) throw Error(ErrorKind::LengthMismatch, "stimulus length differs from dims.t");
  if (stim.n_stimuli < 1) throw Error(ErrorKind::Config, "need at least one stimulus");

  Rng rng(seed);
  const Dims3 sd = dims.spatial();
  const int ks = stim.n_stimuli;

  SynthGroundTruth truth;
  truth.stimulus = stim;
  truth.hrf = hrf;
  truth.patterns = hrf_convolve(stim, hrf);

  const std::array<int, 3> grid = region_grid(sd, n_regions);
  const std::array<double, 3> cell{double(sd.w) / grid[0], double(sd.h) / grid[1], double(sd.d) / grid[2]};
  const double radius = opts.blob_radius * 0.5 * std::min({cell[0], cell[1], cell[2]});

  std::vector<std::array<double, 3>> centers;
  for (int r = 0; r < n_regions; ++r) {
    const int ix = r % grid[0];
    const int iy = (r / grid[0]) % grid[1];
    const int iz = r / (grid[0] * grid[1]);
    std::array<double, 3> c{(ix + 0.5) * cell[0] - 0.5, (iy + 0.5) * cell[1] - 0.5, (iz + 0.5) * cell[2] - 0.5};
    for (int a = 0; a < 3; ++a) c[a] += opts.center_jitter * cell[a] * rng.uniform(-1.0, 1.0);
    centers.push_back(c);
  }

  // Loadings: every region carries its dominant pattern at full weight plus
  // small positive leakage of the others.
  Eigen::MatrixXd loading(n_regions, ks);
  for (int r = 0; r < n_regions; ++r)
    for (int i = 0; i < ks; ++i) loading(r, i) = (i == r % ks) ? 1.0 : rng.uniform(0.0, opts.cross_loading);

  truth.region_labels = {sd, std::vector<std::int32_t>(sd.count(), -1)};
  truth.weight_maps.assign(std::size_t(ks), std::vector<float>(sd.count(), 0.0f));
  const double s = radius / 2.0;
  for (int z = 0; z < sd.d; ++z)
    for (int y = 0; y < sd.h; ++y)
      for (int x = 0; x < sd.w; ++x) {
        int best = -1;
        double best_rel = 1.0;
        double best_d2 = 0.0;
        for (int r = 0; r < n_regions; ++r) {
          const double dx = x - centers[r][0], dy = y - centers[r][1], dz = z - centers[r][2];
          const double d2 = dx * dx + dy * dy + dz * dz;
          const double rel = std::sqrt(d2) / radius;
          if (rel <= best_rel) {
            best_rel = rel;
            best = r;
            best_d2 = d2;
          }
        }
        if (best < 0) continue;
        const std::size_t idx = sd.index(x, y, z);
        truth.region_labels.data[idx] = best;
        const double bump = opts.bump_floor + (1.0 - opts.bump_floor) * std::exp(-best_d2 / (2.0 * s * s));
        for (int i = 0; i < ks; ++i) {
          truth.weight_maps[std::size_t(i)][idx] = float(opts.amplitude * loading(best, i) * bump);
        }
      }

  const std::size_t nv = sd.count();
  Volume4D clean = Volume4D::zeros(dims);
  auto cd = clean.data();
  double power = 0.0;
  for (int t = 0; t < dims.t; ++t) {
    for (std::size_t v = 0; v < nv; ++v) {
      double acc = 0.0;
      for (int i = 0; i < ks; ++i) acc += double(truth.weight_maps[std::size_t(i)][v]) * truth.patterns(i, t);
      const float f = float(acc);
      cd[v + nv * std::size_t(t)] = f;
      power += double(f) * double(f);
    }
  }
  power /= double(dims.count());

  Volume4D noisy = clean;
  if (snr_db != kNoiseless) {
    truth.noise_sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    for (float& v : noisy.data()) v = float(double(v) + truth.noise_sigma * rng.normal());
  }
  truth.clean = std::move(clean);
  return {std::move(noisy), std::move(truth)};
}

StimulusSpec make_event_design(int n_stimuli, int T, int events, int duration, std::uint64_t seed) {
  if (n_stimuli < 1 || events < 1 || duration < 1 || T < 1) {
    throw Error(ErrorKind::Config, "event design parameters must be positive");
  }
  const int slots = n_stimuli * events;
  const int slot_len = T / slots;
  if (slot_len < duration) throw Error(ErrorKind::Config, "series too short for the requested event design");

  Rng rng(seed ^ 0x5eed5eedULL);
  std::vector<int> order;
  for (int i = 0; i < n_stimuli; ++i)
    for (int e = 0; e < events; ++e) order.push_back(i);
  rng.shuffle(order);

  StimulusSpec stim;
  stim.n_stimuli = n_stimuli;
  stim.T = T;
  stim.onsets.resize(std::size_t(n_stimuli));
  stim.durations.resize(std::size_t(n_stimuli));
  for (int slot = 0; slot < slots; ++slot) {
    const int onset = slot * slot_len + int(rng.below(std::uint64_t(slot_len - duration + 1)));
    stim.onsets[std::size_t(order[std::size_t(slot)])].push_back(onset);
    stim.durations[std::size_t(order[std::size_t(slot)])].push_back(duration);
  }
  return stim;
}

std::vector<int> frame_labels(const Eigen::MatrixXd& patterns, int class_a, int class_b, double threshold) {
  if (class_a < 0 || class_b < 0 || class_a >= patterns.rows() || class_b >= patterns.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "class index outside pattern rows");
  }
  const double peak_a = patterns.row(class_a).maxCoeff();
  const double peak_b = patterns.row(class_b).maxCoeff();
  std::vector<int> labels(std::size_t(patterns.cols()), -1);
  for (Eigen::Index t = 0; t < patterns.cols(); ++t) {
    const bool a = patterns(class_a, t) >= threshold * peak_a;
    const bool b = patterns(class_b, t) >= threshold * peak_b;
    if (a && !b) labels[std::size_t(t)] = 0;
    if (b && !a) labels[std::size_t(t)] = 1;
  }
  return labels;
}

void save_ground_truth(const SynthGroundTruth& truth, const std::filesystem::path& path) {
  const Dims4 dims = truth.clean.dims();
  const int ks = int(truth.patterns.rows());
  ByteWriter w;
  w.str(std::string_view(kTruthMagic, 4));
  w.u8(1);
  w.u32(std::uint32_t(ks));
  w.u32(std::uint32_t(dims.w));
  w.u32(std::uint32_t(dims.h));
  w.u32(std::uint32_t(dims.d));
  w.u32(std::uint32_t(dims.t));
  w.f64(truth.noise_sigma);
  for (int i = 0; i < ks; ++i)
    for (int t = 0; t < dims.t; ++t) w.f64(truth.patterns(i, t));
  for (const auto& map : truth.weight_maps)
    for (float v : map) w.f32(v);
  for (std::int32_t l : truth.region_labels.data) w.u32(std::uint32_t(l));
  w.u32(std::uint32_t(truth.stimulus.n_stimuli));
  for (int i = 0; i < truth.stimulus.n_stimuli; ++i) {
    w.u32(std::uint32_t(truth.stimulus.onsets[i].size()));
    for (std::size_t j = 0; j < truth.stimulus.onsets[i].size(); ++j) {
      w.u32(std::uint32_t(truth.stimulus.onsets[i][j]));
      w.u32(std::uint32_t(truth.stimulus.durations[i][j]));
    }
  }
  const HrfParams& h = truth.hrf;
  for (double v : {h.peak_delay, h.undershoot_delay, h.peak_disp, h.undershoot_disp, h.ratio, h.tr, h.length_s}) w.f64(v);
  write_file(path, w.buffer());
}

SynthGroundTruth load_ground_truth(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  ByteReader r(bytes, ErrorKind::CorruptHeader);
  if (r.str(4) != std::string_view(kTruthMagic, 4) || r.u8() != 1) {
    throw Error(ErrorKind::CorruptHeader, "not a ground-truth sidecar");
  }
  SynthGroundTruth truth;
  const int ks = int(r.u32());
  Dims4 dims;
  dims.w = int(r.u32());
  dims.h = int(r.u32());
  dims.d = int(r.u32());
  dims.t = int(r.u32());
  truth.noise_sigma = r.f64();
  truth.patterns.resize(ks, dims.t);
  for (int i = 0; i < ks; ++i)
    for (int t = 0; t < dims.t; ++t) truth.patterns(i, t) = r.f64();
  const Dims3 sd = dims.spatial();
  truth.weight_maps.assign(std::size_t(ks), std::vector<float>(sd.count()));
  for (auto& map : truth.weight_maps)
    for (float& v : map) v = r.f32();
  truth.region_labels = {sd, std::vector<std::int32_t>(sd.count())};
  for (std::int32_t& l : truth.region_labels.data) l = std::int32_t(r.u32());
  truth.stimulus.T = dims.t;
  truth.stimulus.n_stimuli = int(r.u32());
  truth.stimulus.onsets.resize(std::size_t(truth.stimulus.n_stimuli));
  truth.stimulus.durations.resize(std::size_t(truth.stimulus.n_stimuli));
  for (int i = 0; i < truth.stimulus.n_stimuli; ++i) {
    const std::uint32_t n = r.u32();
    for (std::uint32_t j = 0; j < n; ++j) {
      truth.stimulus.onsets[i].push_back(int(r.u32()));
      truth.stimulus.durations[i].push_back(int(r.u32()));
    }
  }
  HrfParams& h = truth.hrf;
  for (double* v : {&h.peak_delay, &h.undershoot_delay, &h.peak_disp, &h.undershoot_disp, &h.ratio, &h.tr, &h.length_s}) *v = r.f64();

  truth.clean = Volume4D::zeros(dims);
  auto cd = truth.clean.data();
  for (int t = 0; t < dims.t; ++t)
    for (std::size_t v = 0; v < sd.count(); ++v) {
      double acc = 0.0;
      for (int i = 0; i < ks; ++i) acc += double(truth.weight_maps[std::size_t(i)][v]) * truth.patterns(i, t);
      cd[v + sd.count() * std::size_t(t)] = float(acc);
    }
  return truth;
}

}  // namespace icnr

namespace icnr {

Volume4D to_int16_units(const Volume4D& vol, double gain) {
  if (!(gain > 0)) throw Error(ErrorKind::Config, "int16 gain must be > 0");
  Volume4D out = vol;
  for (float& v : out.data()) v = float(std::clamp(std::round(double(v) * gain), -32768.0, 32767.0));
  out.source_dtype = DType::Int16;
  return out;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int parse_int(const std::string& s, const std::filesystem::path& path) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorKind::Config, path.string() + ": '" + s + "' is not an integer");
  return v;
}

}  // namespace

void save_stimulus_csv(const StimulusSpec& stim, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "onset,duration,stimulus_id\n";
  for (int i = 0; i < stim.n_stimuli; ++i)
    for (std::size_t j = 0; j < stim.onsets[std::size_t(i)].size(); ++j)
      out << stim.onsets[std::size_t(i)][j] << ',' << stim.durations[std::size_t(i)][j] << ',' << i << '\n';
}

StimulusSpec load_stimulus_csv(const std::filesystem::path& path, int T) {
  StimulusSpec stim;
  stim.T = T;
  for (const auto& row : read_csv(path)) {
    if (row.size() != 3) throw Error(ErrorKind::Config, path.string() + ": expected onset,duration,stimulus_id");
    if (row[0] == "onset") continue;
    const int onset = parse_int(row[0], path), duration = parse_int(row[1], path), id = parse_int(row[2], path);
    if (id < 0) throw Error(ErrorKind::Config, path.string() + ": negative stimulus_id");
    if (id >= stim.n_stimuli) {
      stim.n_stimuli = id + 1;
      stim.onsets.resize(std::size_t(id + 1));
      stim.durations.resize(std::size_t(id + 1));
    }
    stim.onsets[std::size_t(id)].push_back(onset);
    stim.durations[std::size_t(id)].push_back(duration);
  }
  stim.validate();
  return stim;
}

void save_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "frame_index,label\n";
  for (std::size_t t = 0; t < labels.size(); ++t)
    if (labels[t] >= 0) out << t << ',' << labels[t] << '\n';
}

std::vector<int> load_labels_csv(const std::filesystem::path& path, int T) {
  std::vector<int> labels(static_cast<std::size_t>(T), -1);
  for (const auto& row : read_csv(path)) {
    if (row.size() != 2) throw Error(ErrorKind::Config, path.string() + ": expected frame_index,label");
    if (row[0] == "frame_index") continue;
    const int t = parse_int(row[0], path);
    if (t < 0 || t >= T) throw Error(ErrorKind::Config, path.string() + ": frame index out of range");
    labels[std::size_t(t)] = parse_int(row[1], path);
  }
  return labels;
}

}  // namespace icnr
