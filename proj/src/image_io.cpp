#include "dgr/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "dgr/error.hpp"

namespace dgr {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t quantize(double v) {
  double q = std::round(std::min(std::max(v, 0.0), 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

}  // namespace

void save_image_png(const std::string& path, const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3)
    throw RuntimeError("save_image_png: image must be [1,3,H,W]");
  int64_t h = image.dim(2), w = image.dim(3);
  std::vector<uint8_t> rgb(static_cast<size_t>(h * w * 3));
  const double* p = image.data().data();
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        rgb[static_cast<size_t>((y * w + x) * 3 + c)] = quantize(p[c * h * w + y * w + x]);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw RuntimeError("save_image_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeError("save_image_png: libpng failure for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * w * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor load_image_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw RuntimeError("load_image_png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeError("load_image_png: libpng failure for " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != w * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeError("load_image_png: unexpected row size in " + path);
  }
  std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3);
  for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, rgb.data() + y * w * 3, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> data(static_cast<size_t>(3) * w * h);
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        data[(static_cast<size_t>(c) * h + y) * w + x] =
            static_cast<double>(rgb[(static_cast<size_t>(y) * w + x) * 3 + c]) / 255.0;
  return Tensor::from_data({1, 3, static_cast<int64_t>(h), static_cast<int64_t>(w)},
                           std::move(data));
}

void save_pfm(const std::string& path, const Tensor& map) {
  if (map.rank() != 4 || map.dim(0) != 1 || map.dim(1) != 1)
    throw RuntimeError("save_pfm: map must be [1,1,H,W]");
  int64_t h = map.dim(2), w = map.dim(3);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("save_pfm: cannot open " + path);
  f << "Pf\n" << w << " " << h << "\n-1.0\n";
  const double* p = map.data().data();
  std::vector<float> row(static_cast<size_t>(w));
  for (int64_t y = h - 1; y >= 0; --y) {  // bottom-up
    for (int64_t x = 0; x < w; ++x) row[static_cast<size_t>(x)] = static_cast<float>(p[y * w + x]);
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(w * 4));
  }
  if (!f) throw RuntimeError("save_pfm: write failed for " + path);
}

Tensor load_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("load_pfm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "Pf") throw RuntimeError("load_pfm: not a single-channel PFM: " + path);
  int64_t w = 0, h = 0;
  double scale = 0.0;
  f >> w >> h >> scale;
  f.get();  // newline after the scale
  if (w <= 0 || h <= 0 || scale >= 0.0)
    throw RuntimeError("load_pfm: bad header in " + path);
  std::vector<double> data(static_cast<size_t>(w * h));
  std::vector<float> row(static_cast<size_t>(w));
  for (int64_t y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(w * 4));
    if (!f) throw RuntimeError("load_pfm: truncated data in " + path);
    for (int64_t x = 0; x < w; ++x) data[static_cast<size_t>(y * w + x)] = row[static_cast<size_t>(x)];
  }
  return Tensor::from_data({1, 1, h, w}, std::move(data));
}

std::string file_checksum(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("file_checksum: cannot open " + path);
  uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (f) {
    f.read(buf, sizeof(buf));
    std::streamsize got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<uint8_t>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(out);
}

}  // namespace dgr
