#pragma once

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

/// 8-bit interleaved RGB image.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // height * width * 3

  unsigned char* pixel(int y, int x) {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  const unsigned char* pixel(int y, int x) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline ImageU8 read_png_file(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorKind::data, "cannot open image: " + path);

  unsigned char sig[8];
  require(std::fread(sig, 1, 8, fp.get()) == 8 && !png_sig_cmp(sig, 0, 8),
          ErrorKind::data, "not a PNG file: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorKind::data, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::data, "libpng init failed");
  }
  std::vector<png_bytep> rows;
  ImageU8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::data, "undecodable PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_uint_32 w, h;
  int bit_depth, color_type;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.rgb.assign(static_cast<size_t>(w) * h * 3, 0);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.rgb.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  JpegErrorMgr* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  longjmp(mgr->jump, 1);
}

inline ImageU8 read_jpeg_file(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorKind::data, "cannot open image: " + path);

  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorKind::data, "undecodable JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.rgb.assign(static_cast<size_t>(img.width) * img.height * 3, 0);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row =
        img.rgb.data() +
        static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  std::string tail = s.substr(s.size() - suffix.size());
  std::transform(tail.begin(), tail.end(), tail.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return tail == suffix;
}

}  // namespace detail

/// PNG or JPEG (read-only) by extension; everything else is a data error.
inline ImageU8 read_image(const std::string& path) {
  if (detail::has_suffix(path, ".png")) return detail::read_png_file(path);
  if (detail::has_suffix(path, ".jpg") || detail::has_suffix(path, ".jpeg"))
    return detail::read_jpeg_file(path);
  fail(ErrorKind::data, "unsupported image format: " + path);
}

inline void write_png(const std::string& path, const ImageU8& img) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(
      std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorKind::data, "cannot write image: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorKind::data, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::data, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::data, "PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.pixel(y, 0)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// [0,255] u8 -> [-1,1] single-sample tensor [1,3,H,W].
inline Tensor image_to_tensor(const ImageU8& img) {
  Tensor t({1, 3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const unsigned char* p = img.pixel(y, x);
      for (int c = 0; c < 3; ++c)
        t.at4(0, c, y, x) = static_cast<double>(p[c]) / 127.5 - 1.0;
    }
  return t;
}

/// Sample `n` of a [-1,1] batch back to 8-bit RGB, clamping.
inline ImageU8 tensor_to_image(const Tensor& t, int n = 0) {
  require(t.ndim() == 4 && t.dim(1) == 3, ErrorKind::shape,
          "tensor_to_image: want [N,3,H,W]");
  ImageU8 img;
  img.height = t.dim(2);
  img.width = t.dim(3);
  img.rgb.assign(static_cast<size_t>(img.width) * img.height * 3, 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      unsigned char* p = img.pixel(y, x);
      for (int c = 0; c < 3; ++c) {
        double v = (t.at4(n, c, y, x) + 1.0) * 127.5;
        p[c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0) + 0.5);
      }
    }
  return img;
}

/// Bilinear resize of a [N,C,H,W] tensor.
inline Tensor resize_bilinear(const Tensor& t, int out_h, int out_w) {
  require(t.ndim() == 4, ErrorKind::shape, "resize: want NCHW");
  const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  if (h == out_h && w == out_w) return t;
  Tensor out({n, c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
        for (int x = 0; x < out_w; ++x) {
          double fx = (x + 0.5) * sx - 0.5;
          int x0 = static_cast<int>(std::floor(fx));
          double wx = fx - x0;
          int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
          double v00 = t.at4(in, ic, y0c, x0c), v01 = t.at4(in, ic, y0c, x1c);
          double v10 = t.at4(in, ic, y1c, x0c), v11 = t.at4(in, ic, y1c, x1c);
          out.at4(in, ic, y, x) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                  wy * ((1 - wx) * v10 + wx * v11);
        }
      }
  return out;
}

/// Horizontal mirror: output column j = input column W-1-j.
inline Tensor hflip(const Tensor& t) {
  require(t.ndim() == 4, ErrorKind::shape, "hflip: want NCHW");
  Tensor out(t.shape);
  const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.at4(in, ic, y, x) = t.at4(in, ic, y, w - 1 - x);
  return out;
}

/// Tile a list of same-sized [1,3,H,W] images into one grid image.
inline ImageU8 tile_grid(const std::vector<Tensor>& images, int columns) {
  require(!images.empty() && columns >= 1, ErrorKind::shape,
          "tile_grid: nothing to tile");
  const int h = images[0].dim(2), w = images[0].dim(3);
  const int rows =
      (static_cast<int>(images.size()) + columns - 1) / columns;
  ImageU8 grid;
  grid.width = columns * w;
  grid.height = rows * h;
  grid.rgb.assign(static_cast<size_t>(grid.width) * grid.height * 3, 255);
  for (size_t i = 0; i < images.size(); ++i) {
    ImageU8 tile = tensor_to_image(images[i]);
    int r = static_cast<int>(i) / columns, cl = static_cast<int>(i) % columns;
    for (int y = 0; y < h; ++y)
      std::memcpy(grid.pixel(r * h + y, cl * w), tile.pixel(y, 0),
                  static_cast<size_t>(w) * 3);
  }
  return grid;
}

}  // namespace edit
