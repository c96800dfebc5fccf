/**
 * Copyright 2026 The agic Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// PNG / JPEG decoding and preprocessing into the backend's input domain:
// bilinear resize to the model resolution, then an affine map of [0, 255]
// onto the declared value range, identically for every channel.

#include <png.h>

#include <cstdio>
// jpeglib.h needs size_t and FILE declared before inclusion
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <tuple>
#include <string>
#include <vector>

#include "agic/amplifier.hpp"
#include "agic/backend.hpp"
#include "agic/error.hpp"

namespace agic {

// Decoded 8-bit RGB raster.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // HWC, 3 channels
};

class ImageDecodeError : public IoError {
 public:
  using IoError::IoError;
};

namespace detail {

inline RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageDecodeError(std::string("PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.height = image.height;
  out.width = image.width;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ImageDecodeError("PNG: " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

// No objects with non-trivial destructors live between setjmp and the
// libjpeg calls, so longjmp out of the error handler is safe here.
inline bool decode_jpeg_raw(const std::uint8_t* data, std::size_t size, std::uint8_t* dst,
                            std::size_t dst_size, std::size_t* height, std::size_t* width,
                            char* message) {
  jpeg_decompress_struct info;
  JpegErrorManager err;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::strcpy(message, err.message);
    jpeg_destroy_decompress(&info);
    return false;
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, data, static_cast<unsigned long>(size));
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  *height = info.output_height;
  *width = info.output_width;
  const std::size_t stride = static_cast<std::size_t>(info.output_width) * 3;
  if (dst == nullptr || dst_size < stride * info.output_height) {
    jpeg_destroy_decompress(&info);
    return true;
  }
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = dst + static_cast<std::size_t>(info.output_scanline) * stride;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return true;
}

inline RgbImage decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  char message[JMSG_LENGTH_MAX] = {0};
  RgbImage out;
  // First pass reads the header for the size, second pass decodes.
  if (!decode_jpeg_raw(bytes.data(), bytes.size(), nullptr, 0, &out.height, &out.width,
                       message)) {
    throw ImageDecodeError(std::string("JPEG: ") + message);
  }
  out.pixels.resize(out.height * out.width * 3);
  if (!decode_jpeg_raw(bytes.data(), bytes.size(), out.pixels.data(), out.pixels.size(),
                       &out.height, &out.width, message)) {
    throw ImageDecodeError(std::string("JPEG: ") + message);
  }
  return out;
}

}  // namespace detail

inline RgbImage decode_image(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::array<std::uint8_t, 8> kPngMagic{0x89, 'P', 'N', 'G', 0x0D, 0x0A,
                                                         0x1A, 0x0A};
  RgbImage img;
  if (bytes.size() >= 8 && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    img = detail::decode_png(bytes);
  } else if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    img = detail::decode_jpeg(bytes);
  } else {
    throw ImageDecodeError("unrecognized image format (expected PNG or JPEG)");
  }
  if (img.height == 0 || img.width == 0) throw ImageDecodeError("image has zero size");
  return img;
}

inline RgbImage read_image(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open image '" + path + "'");
  std::vector<std::uint8_t> bytes;
  std::array<std::uint8_t, 1 << 16> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), f)) > 0) {
    bytes.insert(bytes.end(), buf.begin(), buf.begin() + static_cast<long>(n));
  }
  std::fclose(f);
  try {
    return decode_image(bytes);
  } catch (const ImageDecodeError& e) {
    throw ImageDecodeError("'" + path + "': " + e.what());
  }
}

// Bilinear resize (pixel-center aligned) followed by v -> lo + v/255 * (hi - lo).
inline ImageTensor preprocess(const RgbImage& img, std::size_t height, std::size_t width,
                              ValueRange range) {
  if (height == 0 || width == 0) throw DimensionError("target size must be positive");
  ImageTensor out(height, width, 3, range);
  auto src = [&](std::size_t y, std::size_t x, std::size_t c) {
    return static_cast<double>(img.pixels[(y * img.width + x) * 3 + c]);
  };
  auto coord = [](std::size_t p, std::size_t dst, std::size_t src_extent) {
    double s = (static_cast<double>(p) + 0.5) * static_cast<double>(src_extent) /
                   static_cast<double>(dst) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
    const auto i0 = static_cast<std::size_t>(s);
    return std::tuple{i0, std::min(i0 + 1, src_extent - 1), s - static_cast<double>(i0)};
  };
  const double scale = (range.hi - range.lo) / 255.0;
  for (std::size_t y = 0; y < height; ++y) {
    const auto [y0, y1, ty] = coord(y, height, img.height);
    for (std::size_t x = 0; x < width; ++x) {
      const auto [x0, x1, tx] = coord(x, width, img.width);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = src(y0, x0, c) * (1 - tx) + src(y0, x1, c) * tx;
        const double bottom = src(y1, x0, c) * (1 - tx) + src(y1, x1, c) * tx;
        const double v = top * (1 - ty) + bottom * ty;
        out(y, x, c) = std::clamp(range.lo + v * scale, range.lo, range.hi);
      }
    }
  }
  return out;
}

inline ImageTensor load_image_tensor(const std::string& path, const BackendDescriptor& d) {
  return preprocess(read_image(path), d.input_height, d.input_width, d.value_range);
}

}  // namespace agic
