#include "mfcal/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "mfcal/errors.hpp"

namespace mfcal {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void on_png_error(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

GrayImage read_gray_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ImageIoError("cannot open image " + path.string());

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("libpng initialization failed");
  }

  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("cannot decode " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path.string() + " is not an 8- or 16-bit single-channel PNG");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = depth;
  const std::size_t bpp = depth / 8;
  const std::size_t stride = img.width * bpp;
  buffer.resize(stride * img.height);
  rows.resize(img.height);
  for (int r = 0; r < img.height; ++r) rows[r] = buffer.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img.pixels.resize(std::size_t(img.width) * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    // PNG stores 16-bit samples big-endian.
    img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]) : buffer[i];
  }
  return img;
}

void write_gray_png(const GrayImage& img, const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw ImageIoError("cannot write image " + path.string());

  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("libpng initialization failed");
  }
  const std::size_t bpp = img.bit_depth / 8;
  std::vector<png_byte> buffer(std::size_t(img.width) * img.height * bpp);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (bpp == 2) {
      buffer[2 * i] = static_cast<png_byte>(img.pixels[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(img.pixels[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(img.pixels[i]);
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (int r = 0; r < img.height; ++r) rows[r] = buffer.data() + r * img.width * bpp;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("cannot encode " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

DepthMap read_depth_png(const fs::path& path) {
  const GrayImage img = read_gray_png(path);
  if (img.bit_depth != 16) throw ImageIoError(path.string() + ": depth maps must be 16-bit");
  DepthMap depth(img.width, img.height);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const std::uint16_t mm = img.pixels[depth.index(u, v)];
      if (mm != 0) depth.set(u, v, mm * 1e-3);
    }
  }
  return depth;
}

void write_depth_png(const DepthMap& depth, const fs::path& path) {
  GrayImage img;
  img.width = depth.width;
  img.height = depth.height;
  img.bit_depth = 16;
  img.pixels.assign(depth.values.size(), 0);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    if (!depth.valid[i]) continue;
    const long mm = std::lround(depth.values[i] * 1e3);
    img.pixels[i] = static_cast<std::uint16_t>(std::clamp(mm, 0L, 65535L));
  }
  write_gray_png(img, path);
}

SegmentationMask read_mask_png(const fs::path& path) {
  const GrayImage img = read_gray_png(path);
  if (img.bit_depth != 8) throw ImageIoError(path.string() + ": masks must be 8-bit");
  SegmentationMask mask(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) mask.values[i] = img.pixels[i] != 0 ? 1 : 0;
  return mask;
}

void write_mask_png(const SegmentationMask& mask, const fs::path& path) {
  GrayImage img;
  img.width = mask.width;
  img.height = mask.height;
  img.bit_depth = 8;
  img.pixels.resize(mask.values.size());
  for (std::size_t i = 0; i < mask.values.size(); ++i) img.pixels[i] = mask.values[i] ? 255 : 0;
  write_gray_png(img, path);
}

}  // namespace mfcal
