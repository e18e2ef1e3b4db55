#include "icnr/image_codec.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <limits>

#include <jpeglib.h>
#include <png.h>

#include "icnr/bytes.hpp"
#include "icnr/error.hpp"

namespace icnr {

namespace {

struct PngReadState {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_cb(png_structp) {}

void png_read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (len > st->data.size() - st->pos) png_error(png, "png stream truncated");
  std::memcpy(data, st->data.data() + st->pos, len);
  st->pos += len;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Gray8& img) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Io, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_compression_level(png, 9);
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + std::size_t(y) * std::size_t(img.width)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Gray8 decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorKind::CorruptStream, "not a PNG stream");
  PngReadState st{bytes, 0};
  Gray8 img;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::CorruptStream, "PNG decoding failed");
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_error(png, "unexpected PNG pixel format");
  }
  img.width = int(png_get_image_width(png, info));
  img.height = int(png_get_image_height(png, info));
  img.pixels.resize(std::size_t(img.width) * std::size_t(img.height));
  for (int y = 0; y < img.height; ++y) png_read_row(png, img.pixels.data() + std::size_t(y) * std::size_t(img.width), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<std::uint8_t> encode_jpeg(const Gray8& img, int quality) {
  if (quality < 1 || quality > 100) throw Error(ErrorKind::Config, "JPEG quality must lie in [1, 100]");
  jpeg_compress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    throw Error(ErrorKind::Io, "JPEG encoding failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &size);
  cinfo.image_width = JDIMENSION(img.width);
  cinfo.image_height = JDIMENSION(img.height);
  cinfo.input_components = 1;
  cinfo.in_color_space = JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.optimize_coding = TRUE;
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.pixels.data() + std::size_t(cinfo.next_scanline) * std::size_t(img.width));
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buf, buf + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buf);
  return out;
}

Gray8 decode_jpeg(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorKind::CorruptStream, "JPEG stream too short");
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  err.mgr.emit_message = jpeg_silent;
  Gray8 img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::CorruptStream, "JPEG decoding failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_GRAYSCALE;
  jpeg_start_decompress(&cinfo);
  img.width = int(cinfo.output_width);
  img.height = int(cinfo.output_height);
  img.pixels.resize(std::size_t(img.width) * std::size_t(img.height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + std::size_t(cinfo.output_scanline) * std::size_t(img.width);
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

std::vector<std::uint8_t> encode_mean_frame(const MeanFrame& mean, int quality, bool lossless) {
  const Dims3& d = mean.dims;
  if (mean.data.size() != d.count() || d.count() == 0) throw Error(ErrorKind::ShapeMismatch, "mean frame size mismatch");
  if (!lossless && (quality < 1 || quality > 100)) throw Error(ErrorKind::Config, "codec.mean_quality must lie in [1, 100]");
  ByteWriter out;
  out.u8(std::uint8_t(lossless ? ImageCodec::Png : ImageCodec::Jpeg));
  out.u32(std::uint32_t(d.w));
  out.u32(std::uint32_t(d.h));
  out.u32(std::uint32_t(d.d));

  Gray8 img{d.w, d.h * d.d, std::vector<std::uint8_t>(d.count())};
  const std::size_t plane = std::size_t(d.w) * std::size_t(d.h);
  for (int z = 0; z < d.d; ++z) {
    const auto first = mean.data.begin() + std::ptrdiff_t(plane * std::size_t(z));
    const auto [lo_it, hi_it] = std::minmax_element(first, first + std::ptrdiff_t(plane));
    const float lo = *lo_it;
    float step = (double(*hi_it) - double(lo)) > 0 ? float((double(*hi_it) - double(lo)) / 255.0) : 0.0f;
    while (step > 0 && double(lo) + 255.0 * double(step) < double(*hi_it))
      step = std::nextafter(step, std::numeric_limits<float>::infinity());
    out.f32(lo);
    out.f32(step);
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = step > 0 ? std::round((double(first[std::ptrdiff_t(i)]) - lo) / step) : 0.0;
      img.pixels[plane * std::size_t(z) + i] = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
  }
  const std::vector<std::uint8_t> coded = lossless ? encode_png(img) : encode_jpeg(img, quality);
  out.u32(std::uint32_t(coded.size()));
  out.bytes(coded);
  return out.take();
}

MeanFrame decode_mean_frame(std::span<const std::uint8_t> payload) {
  ByteReader in(payload);
  const std::uint8_t codec = in.u8();
  if (codec > 1) throw Error(ErrorKind::CorruptStream, "unknown mean-frame codec id");
  MeanFrame mean;
  mean.dims.w = int(in.u32());
  mean.dims.h = int(in.u32());
  mean.dims.d = int(in.u32());
  const Dims3& d = mean.dims;
  if (d.w <= 0 || d.h <= 0 || d.d <= 0 || d.count() > (std::size_t(1) << 31)) {
    throw Error(ErrorKind::CorruptStream, "implausible mean-frame dims");
  }
  std::vector<std::pair<float, float>> maps(std::size_t(d.d));
  for (auto& m : maps) {
    m.first = in.f32();
    m.second = in.f32();
  }
  const std::uint32_t len = in.u32();
  const auto coded = in.bytes(len);
  const Gray8 img = codec == 0 ? decode_png(coded) : decode_jpeg(coded);
  if (img.width != d.w || img.height != d.h * d.d) throw Error(ErrorKind::CorruptStream, "mean-frame image size mismatch");
  mean.data.resize(d.count());
  const std::size_t plane = std::size_t(d.w) * std::size_t(d.h);
  for (int z = 0; z < d.d; ++z) {
    const auto [lo, step] = maps[std::size_t(z)];
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t k = plane * std::size_t(z) + i;
      mean.data[k] = float(double(lo) + double(step) * img.pixels[k]);
    }
  }
  return mean;
}

}  // namespace icnr
