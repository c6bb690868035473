#include "wtsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace wtsr {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw Error("cannot open " + path);
  return f;
}

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext;
}

ImageBuffer load_png(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng init failed");
  }

  ImageBuffer out;
  std::vector<png_bytep> rows;
  std::string err;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(err.empty() ? "png decode failed: " + path : err);
  }

  png_init_io(png, f);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) {
    err = "unsupported bit depth: 16-bit PNG: " + path;
    longjmp(png_jmpbuf(png), 1);
  }
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (bit_depth < 8) png_set_packing(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  out.width = int64_t(png_get_image_width(png, info));
  out.height = int64_t(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) {
    err = "unsupported PNG channel layout: " + path;
    longjmp(png_jmpbuf(png), 1);
  }
  out.rgb.resize(size_t(3 * out.width * out.height));
  rows.resize(size_t(out.height));
  for (int64_t y = 0; y < out.height; ++y) rows[size_t(y)] = out.row(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void save_png(const ImageBuffer& buf, const std::string& path) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng init failed");
  }
  std::vector<png_bytep> rows(size_t(buf.height));
  for (int64_t y = 0; y < buf.height; ++y)
    rows[size_t(y)] = const_cast<png_bytep>(buf.row(y));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png encode failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(buf.width), png_uint_32(buf.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Skips whitespace and '#' comment lines, then reads one unsigned value.
int64_t pnm_value(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw Error("malformed PNM header: " + path);
  int64_t v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

ImageBuffer load_pnm(const std::string& path, bool gray) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[2];
  in.read(magic, 2);
  const int64_t w = pnm_value(in, path);
  const int64_t h = pnm_value(in, path);
  const int64_t maxval = pnm_value(in, path);
  if (w <= 0 || h <= 0) throw Error("malformed PNM header: " + path);
  if (maxval != 255) throw Error("unsupported PNM maxval " + std::to_string(maxval) + ": " + path);
  const int64_t samples = gray ? w * h : 3 * w * h;
  std::vector<uint8_t> raw(static_cast<size_t>(samples));
  in.read(reinterpret_cast<char*>(raw.data()), samples);
  if (in.gcount() != samples) throw Error("truncated PNM data: " + path);
  ImageBuffer out;
  out.width = w;
  out.height = h;
  out.rgb.resize(size_t(3 * w * h));
  if (gray) {
    for (int64_t i = 0; i < w * h; ++i) {
      out.rgb[size_t(3 * i)] = raw[size_t(i)];
      out.rgb[size_t(3 * i + 1)] = raw[size_t(i)];
      out.rgb[size_t(3 * i + 2)] = raw[size_t(i)];
    }
  } else {
    out.rgb = std::move(raw);
  }
  return out;
}

void save_pnm(const ImageBuffer& buf, const std::string& path, bool gray) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << (gray ? "P5" : "P6") << "\n" << buf.width << " " << buf.height << "\n255\n";
  if (gray) {
    std::vector<uint8_t> plane(size_t(buf.width * buf.height));
    for (int64_t i = 0; i < buf.width * buf.height; ++i) plane[size_t(i)] = buf.rgb[size_t(3 * i)];
    out.write(reinterpret_cast<const char*>(plane.data()), int64_t(plane.size()));
  } else {
    out.write(reinterpret_cast<const char*>(buf.rgb.data()), int64_t(buf.rgb.size()));
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  uint8_t magic[8] = {0};
  const size_t got = std::fread(magic, 1, 8, f.get());
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) {
    std::rewind(f.get());
    return load_png(f.get(), path);
  }
  if (got >= 2 && magic[0] == 'P' && (magic[1] == '6' || magic[1] == '5')) {
    f.reset();
    return load_pnm(path, magic[1] == '5');
  }
  throw Error("unsupported image format (expected PNG, PPM, or PGM): " + path);
}

void save_image(const ImageBuffer& buf, const std::string& path) {
  if (buf.width <= 0 || buf.height <= 0 ||
      buf.rgb.size() != size_t(3 * buf.width * buf.height))
    throw Error("save_image: inconsistent buffer for " + path);
  const std::string ext = lower_ext(path);
  if (ext == ".png") return save_png(buf, path);
  if (ext == ".ppm") return save_pnm(buf, path, false);
  if (ext == ".pgm") return save_pnm(buf, path, true);
  throw Error("unsupported image extension '" + ext + "' (use .png, .ppm, or .pgm): " + path);
}

ImageDims probe_image_dims(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  uint8_t head[26] = {0};
  const size_t got = std::fread(head, 1, sizeof(head), f.get());
  if (got >= 24 && png_sig_cmp(head, 0, 8) == 0) {
    // IHDR payload starts at byte 16: big-endian width then height
    auto be32 = [&](int o) {
      return (int64_t(head[o]) << 24) | (int64_t(head[o + 1]) << 16) |
             (int64_t(head[o + 2]) << 8) | int64_t(head[o + 3]);
    };
    return ImageDims{be32(16), be32(20)};
  }
  if (got >= 2 && head[0] == 'P' && (head[1] == '6' || head[1] == '5')) {
    f.reset();
    std::ifstream in(path, std::ios::binary);
    char magic[2];
    in.read(magic, 2);
    const int64_t w = pnm_value(in, path);
    const int64_t h = pnm_value(in, path);
    return ImageDims{w, h};
  }
  throw Error("unsupported image format (expected PNG, PPM, or PGM): " + path);
}

Tensor image_to_tensor(const ImageBuffer& buf) {
  Tensor t(1, 3, buf.height, buf.width);
  const float inv = 1.0f / 255.0f;
  for (int64_t c = 0; c < 3; ++c) {
    float* dst = t.plane(0, c);
    for (int64_t y = 0; y < buf.height; ++y) {
      const uint8_t* src = buf.row(y);
      for (int64_t x = 0; x < buf.width; ++x) dst[y * buf.width + x] = float(src[3 * x + c]) * inv;
    }
  }
  return t;
}

ImageBuffer tensor_to_image(const Tensor& t) {
  const Shape s = t.shape();
  if (s.n != 1 || (s.c != 3 && s.c != 1))
    throw Error("tensor_to_image: expected [1,3,h,w] or [1,1,h,w], got " + s.str());
  ImageBuffer buf;
  buf.width = s.w;
  buf.height = s.h;
  buf.rgb.resize(size_t(3 * s.w * s.h));
  auto quant = [](float v) {
    return uint8_t(std::clamp<long>(std::lround(double(v) * 255.0), 0, 255));
  };
  for (int64_t c = 0; c < 3; ++c) {
    const float* src = t.plane(0, s.c == 3 ? c : 0);
    for (int64_t y = 0; y < s.h; ++y) {
      uint8_t* dst = buf.row(y);
      for (int64_t x = 0; x < s.w; ++x) dst[3 * x + c] = quant(src[y * s.w + x]);
    }
  }
  return buf;
}

Tensor load_image_tensor(const std::string& path) { return image_to_tensor(load_image(path)); }

void save_tensor_image(const Tensor& t, const std::string& path) {
  save_image(tensor_to_image(t), path);
}

}  // namespace wtsr
