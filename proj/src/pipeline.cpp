#include "icnr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icnr/error.hpp"
#include "icnr/eval.hpp"
#include "icnr/image_codec.hpp"
#include "icnr/rng.hpp"

namespace icnr {

namespace {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 15];
  return s;
}

VoxelSeriesSet slice_frames(const VoxelSeriesSet& set, int t0, int t1) {
  VoxelSeriesSet out;
  out.dims = set.dims;
  out.coords = set.coords;
  out.series = set.series.middleCols(t0, t1 - t0);
  return out;
}

// Linear interpolation weights from block centres back onto the fine grid.
struct Lerp {
  int i0, i1;
  double w1;
};

Lerp lerp_at(int x, int factor, int blocks) {
  const double p = (x + 0.5) / factor - 0.5;
  int i0 = int(std::floor(p));
  double w1 = p - i0;
  if (i0 < 0) {
    i0 = 0;
    w1 = 0.0;
  }
  int i1 = i0 + 1;
  if (i1 >= blocks) {
    i1 = blocks - 1;
    if (i0 >= blocks) i0 = blocks - 1;
    if (i0 == i1) w1 = 0.0;
  }
  return {i0, i1, w1};
}

}  // namespace

std::vector<std::pair<int, int>> chunk_ranges(int T, std::optional<int> chunk_len) {
  if (T < 1) throw Error(ErrorKind::Config, "series length must be >= 1");
  if (!chunk_len) return {{0, T}};
  if (*chunk_len < 1 || *chunk_len > T) throw Error(ErrorKind::Config, "train.chunk_len must lie in [1, T]");
  std::vector<std::pair<int, int>> out;
  for (int t = 0; t < T; t += *chunk_len) out.emplace_back(t, std::min(T, t + *chunk_len));
  return out;
}

std::vector<ChunkModel> train_chunked(const Volume4D& residual, const Mask3D& mask, const CompressOptions& opts,
                                      std::vector<ChunkReport>* reports) {
  opts.train.validate();
  const VoxelSeriesSet full = apply_mask(residual, mask);
  std::vector<ChunkModel> models;
  int index = 0;
  for (const auto& [t0, t1] : chunk_ranges(residual.dims().t, opts.train.chunk_len)) {
    VoxelSeriesSet set = slice_frames(full, t0, t1);
    const Normalization norm = Normalization::fit(set.series);
    set.series = norm.apply(set.series);

    ModelConfig mc = opts.model;
    mc.T = t1 - t0;
    TrainConfig tc = opts.train;
    tc.seed = opts.train.seed + std::uint64_t(index);
    InrModel model(mc, tc.seed);
    ChunkReport rep{t0, t1, {}, 0, true};

    if (opts.init == BankInit::Ica) {
      IcaOptions io = opts.ica;
      io.seed = opts.ica.seed + std::uint64_t(index);
      const IcaDecomposition decomp = fast_ica(set.series, mc.K, io);
      rep.ica_iterations = decomp.iterations;
      rep.ica_converged = !decomp.non_converged;
      rep.train.pretrain_curve = pretrain(model, decomp, set, tc);
    } else {
      Rng rng(tc.seed ^ 0x42414e4b494e4954ULL);
      Eigen::MatrixXd bank(mc.K, mc.T);
      const double r = std::sqrt(3.0);
      for (Eigen::Index i = 0; i < bank.size(); ++i)
        bank(i) = opts.init == BankInit::Uniform ? rng.uniform(-r, r) : rng.normal();
      model.set_bank(bank);
    }
    std::vector<double> pre = std::move(rep.train.pretrain_curve);
    rep.train = train(model, set, tc);
    rep.train.pretrain_curve = std::move(pre);
    models.push_back({t0, t1, norm, std::move(model)});
    if (reports) reports->push_back(std::move(rep));
    ++index;
  }
  return models;
}

CompressResult compress_volume(const Volume4D& vol, const Mask3D& mask, const CompressOptions& opts) {
  opts.model.validate();
  opts.codec.validate();
  if (mask.dims() != vol.dims().spatial()) throw Error(ErrorKind::ShapeMismatch, "mask dims differ from volume");
  if (mask.count() == 0) throw Error(ErrorKind::EmptyMask, "mask selects no voxels");

  // Residuals are taken against the mean frame as it will be decoded.
  const MeanFrame mean =
      decode_mean_frame(encode_mean_frame(temporal_mean(vol), opts.codec.mean_quality, opts.codec.mean_lossless));
  Volume4D residual = vol;
  {
    const std::size_t V = vol.dims().voxels();
    auto data = residual.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= mean.data[i % V];
  }

  CompressResult res;
  Artifact a;
  a.dims = vol.dims();
  a.source_dtype = vol.source_dtype;
  a.voxel_scale = vol.voxel_scale;
  a.model = opts.model;
  a.train_digest = hex64(fnv1a64(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(opts.train.canonical().data()), opts.train.canonical().size())));
  a.codec = opts.codec;
  a.mask = mask;
  a.mean = mean;
  a.chunks = train_chunked(residual, mask, opts, &res.chunks);

  res.bytes = pack(a);
  res.ratio = compression_ratio(vol.dims(), vol.source_dtype, res.bytes.size());
  const Volume4D recon = decompress(res.bytes);
  res.psnr = psnr(vol, recon, &mask);
  return res;
}

Volume4D decompress(const Artifact& a) {
  Volume4D out = Volume4D::zeros(a.dims);
  out.voxel_scale = a.voxel_scale;
  out.source_dtype = a.source_dtype;
  const std::size_t V = a.dims.voxels();
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = a.mean.data[i % V];

  std::vector<Coord> coords;
  std::vector<std::size_t> index;
  const Dims3 sd = a.dims.spatial();
  for (int x = 0; x < sd.w; ++x)
    for (int y = 0; y < sd.h; ++y)
      for (int z = 0; z < sd.d; ++z)
        if (a.mask.at(x, y, z)) {
          coords.push_back({x, y, z});
          index.push_back(sd.index(x, y, z));
        }
  if (coords.empty()) return out;
  const Eigen::MatrixXd embedded = embed_batch(normalized_coords(coords, sd), a.model.embed_freqs);
  for (const ChunkModel& c : a.chunks) {
    const Eigen::MatrixXd pred = c.norm.invert(predict_all(c.model, embedded));
    for (std::size_t i = 0; i < coords.size(); ++i)
      for (int t = c.t0; t < c.t1; ++t) {
        const std::size_t k = index[i] + V * std::size_t(t);
        data[k] = float(double(data[k]) + pred(Eigen::Index(i), t - c.t0));
      }
  }
  return out;
}

Volume4D decompress(std::span<const std::uint8_t> bytes) { return decompress(unpack(bytes)); }

BlockCodecResult block_average_codec(const Volume4D& vol, int spatial, int temporal) {
  if (spatial < 1 || temporal < 1) throw Error(ErrorKind::Config, "block factors must be >= 1");
  const Dims4& d = vol.dims();
  const Dims4 c{(d.w + spatial - 1) / spatial, (d.h + spatial - 1) / spatial, (d.d + spatial - 1) / spatial,
                (d.t + temporal - 1) / temporal};
  std::vector<double> sum(c.count(), 0.0);
  std::vector<int> cnt(c.count(), 0);
  auto cidx = [&c](int x, int y, int z, int t) {
    return std::size_t(x) + std::size_t(c.w) * (std::size_t(y) + std::size_t(c.h) * (std::size_t(z) + std::size_t(c.d) * std::size_t(t)));
  };
  for (int t = 0; t < d.t; ++t)
    for (int z = 0; z < d.d; ++z)
      for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
          const std::size_t k = cidx(x / spatial, y / spatial, z / spatial, t / temporal);
          sum[k] += vol.at(x, y, z, t);
          ++cnt[k];
        }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    sum[k] /= cnt[k];
    lo = std::min(lo, sum[k]);
    hi = std::max(hi, sum[k]);
  }
  // int16 storage with one affine map.
  const double step = hi > lo ? (hi - lo) / 65535.0 : 1.0;
  for (double& v : sum) v = lo + step * std::round((v - lo) / step);

  BlockCodecResult out;
  out.bytes = std::uint64_t(c.count()) * 2 + 16;
  out.reconstruction = Volume4D::zeros(d);
  out.reconstruction.source_dtype = vol.source_dtype;
  for (int t = 0; t < d.t; ++t) {
    const Lerp lt = lerp_at(t, temporal, c.t);
    for (int z = 0; z < d.d; ++z) {
      const Lerp lz = lerp_at(z, spatial, c.d);
      for (int y = 0; y < d.h; ++y) {
        const Lerp ly = lerp_at(y, spatial, c.h);
        for (int x = 0; x < d.w; ++x) {
          const Lerp lx = lerp_at(x, spatial, c.w);
          double acc = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int e = 0; e < 2; ++e)
                for (int f = 0; f < 2; ++f) {
                  const double w = (a ? lx.w1 : 1 - lx.w1) * (b ? ly.w1 : 1 - ly.w1) * (e ? lz.w1 : 1 - lz.w1) *
                                   (f ? lt.w1 : 1 - lt.w1);
                  if (w == 0) continue;
                  acc += w * sum[cidx(a ? lx.i1 : lx.i0, b ? ly.i1 : ly.i0, e ? lz.i1 : lz.i0, f ? lt.i1 : lt.i0)];
                }
          out.reconstruction.at(x, y, z, t) = float(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace icnr
