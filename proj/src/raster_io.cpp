#include "cadenet/raster_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace cadenet::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

int ppm_token(std::istream& in) {
  // Next integer token, skipping whitespace and '#' comments.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  return v;
}

}  // namespace

Raster read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '6' && m1 != '5')) fail(path, "not a binary PPM/PGM");
  const int channels = m1 == '6' ? 3 : 1;
  const int w = ppm_token(in), h = ppm_token(in), maxval = ppm_token(in);
  if (w <= 0 || h <= 0) fail(path, "bad dimensions");
  if (maxval != 255) fail(path, "only maxval 255 supported");
  in.get();  // single whitespace after header
  Raster r(w, h, channels);
  in.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(r.data.size()));
  if (static_cast<std::size_t>(in.gcount()) != r.data.size()) fail(path, "truncated pixel data");
  return r;
}

void write_ppm(const std::string& path, const Raster& r) {
  r.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << (r.channels == 3 ? "P6" : "P5") << "\n" << r.width << " " << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.data.data()),
            static_cast<std::streamsize>(r.data.size()));
  if (!out) fail(path, "write failed");
}

Raster read_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) fail(path, "cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    std::fclose(fp);
    fail(path, "libpng init failed");
  }
  Raster r;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(path, "libpng read error");
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = static_cast<int>(png_get_channels(png, info));
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(path, "unsupported channel count after expansion");
  }
  r = Raster(w, h, ch);
  rows.resize(h);
  for (int y = 0; y < h; ++y)
    rows[y] = r.data.data() + static_cast<std::size_t>(y) * w * ch;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return r;
}

void write_png(const std::string& path, const Raster& r) {
  r.validate();
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    std::fclose(fp);
    fail(path, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(path, "libpng write error");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height),
               8, r.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(r.height);
  for (int y = 0; y < r.height; ++y)
    rows[y] = const_cast<png_bytep>(r.data.data() + static_cast<std::size_t>(y) * r.width * r.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Raster read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(path, "cannot open");
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::memcmp(sig, png_sig, 8) == 0) return read_png(path);
  if (sig[0] == 'P' && (sig[1] == '6' || sig[1] == '5')) return read_ppm(path);
  fail(path, "unrecognized image format");
}

void write_image(const std::string& path, const Raster& r) {
  auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "png") return write_png(path, r);
  if (ext == "ppm" || ext == "pgm") return write_ppm(path, r);
  fail(path, "unsupported image extension (use .png/.ppm/.pgm)");
}

}  // namespace cadenet::io
