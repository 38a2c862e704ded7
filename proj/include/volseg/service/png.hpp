#pragma once

// In-memory 8-bit PNG encoding through libpng's simplified API.

#include <png.h>

#include <cstdint>
#include <string>
#include <vector>

#include "volseg/error.hpp"

namespace volseg::service {

/// Encodes `channels` interleaved 8-bit samples per pixel (1 = gray, 2 = gray + alpha).
inline std::vector<std::uint8_t> encode_png(const std::vector<std::uint8_t>& pixels, std::uint32_t width,
                                            std::uint32_t height, int channels = 1) {
  if (channels != 1 && channels != 2) throw InvalidArgument("png: channels must be 1 or 2");
  if (pixels.size() != static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels)) {
    throw InvalidArgument("png: pixel buffer does not match image size");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_GA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("png: " + msg);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("png: " + msg);
  }
  out.resize(size);
  return out;
}

struct DecodedPng {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes a gray or gray+alpha PNG produced by encode_png.
inline DecodedPng decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw BadHeader(std::string("png: ") + image.message);
  }
  DecodedPng out;
  out.channels = (image.format & PNG_FORMAT_FLAG_ALPHA) ? 2 : 1;
  image.format = out.channels == 2 ? PNG_FORMAT_GA : PNG_FORMAT_GRAY;
  out.width = image.width;
  out.height = image.height;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw BadHeader("png: " + msg);
  }
  return out;
}

}  // namespace volseg::service
