#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "dbhcam/error.hpp"

namespace dbhcam {

/// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

using Bytes = std::vector<std::uint8_t>;

/// Decodes PNG bytes into a gray or RGB raster. Alpha is composited away,
/// palettes and sub-byte depths are expanded.
inline Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::FormatError, "not a PNG stream");
  }
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::FormatError, std::string("PNG header: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  Raster out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  png_color background{255, 255, 255};
  if (!png_image_finish_read(&image, &background, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::FormatError, "PNG data: " + msg);
  }
  return out;
}

namespace detail {

struct PngWriteState {
  Bytes* out;
  const char* error;
};

inline void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
  state->out->insert(state->out->end(), data, data + length);
}

inline void png_flush_noop(png_structp) {}

inline void png_record_error(png_structp png, png_const_charp message) {
  auto* state = static_cast<PngWriteState*>(png_get_error_ptr(png));
  state->error = message;
  png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

// Only trivially destructible locals may live in this frame (setjmp).
inline bool png_write_rows(PngWriteState* state, const std::uint8_t* pixels, int width, int height,
                           int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, state, png_record_error,
                                            png_ignore_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, state, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Masks and synthetic frames are long constant runs; RLE at level 1 keeps
  // 12 MP encodes in the tens of milliseconds.
  png_set_compression_level(png, 1);
  png_set_compression_strategy(png, 3 /* Z_RLE */);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

/// Deterministic PNG encoding (fixed filter and compression settings).
inline Bytes encode_png(const Raster& raster) {
  if (raster.width <= 0 || raster.height <= 0 ||
      raster.pixels.size() != static_cast<std::size_t>(raster.width) * raster.height * raster.channels) {
    throw Error(ErrorCode::FormatError, "PNG encode: raster size mismatch");
  }
  Bytes out;
  out.reserve(4096);
  detail::PngWriteState state{&out, nullptr};
  if (!detail::png_write_rows(&state, raster.pixels.data(), raster.width, raster.height,
                              raster.channels)) {
    throw Error(ErrorCode::FormatError,
                std::string("PNG encode: ") + (state.error ? state.error : "libpng failure"));
  }
  return out;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace dbhcam
