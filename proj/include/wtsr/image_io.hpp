#pragma once

// Image codecs: 8-bit PNG (RGB/RGBA/gray/palette) via libpng plus binary
// PPM/PGM. All pixel math elsewhere runs in floating point [0,1]; 8-bit
// quantization happens only here.

#include <cstdint>
#include <string>
#include <vector>

#include "wtsr/tensor.hpp"

namespace wtsr {

// Interleaved 8-bit RGB, row-major.
struct ImageBuffer {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height bytes

  uint8_t* row(int64_t y) { return rgb.data() + 3 * y * width; }
  const uint8_t* row(int64_t y) const { return rgb.data() + 3 * y * width; }
};

// Format picked from magic bytes: PNG, P6 (PPM), or P5 (PGM, replicated to
// three channels). 16-bit PNG is rejected by design.
ImageBuffer load_image(const std::string& path);

// Format picked from the extension: .png, .ppm, or .pgm (writes the red
// channel, intended for gray buffers with identical channels).
void save_image(const ImageBuffer& buf, const std::string& path);

// Width/height without a full decode, for manifest validation.
struct ImageDims {
  int64_t width = 0;
  int64_t height = 0;
};
ImageDims probe_image_dims(const std::string& path);

// [1,3,h,w] in [0,1] via v/255.
Tensor image_to_tensor(const ImageBuffer& buf);

// round(v*255) clamped; accepts 3 channels, or 1 channel replicated to gray.
ImageBuffer tensor_to_image(const Tensor& t);

Tensor load_image_tensor(const std::string& path);
void save_tensor_image(const Tensor& t, const std::string& path);

}  // namespace wtsr
