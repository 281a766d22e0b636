#pragma once

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "sb/image.hpp"

namespace sb::imagecore {

namespace detail {

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    fail(Errc::FileNotFound, "no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::FileNotFound, "cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ByteReader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* r = static_cast<ByteReader*>(png_get_io_ptr(png));
  if (r->pos + count > r->bytes->size()) png_error(png, "truncated PNG stream");
  std::copy_n(r->bytes->data() + r->pos, count, out);
  r->pos += count;
}

inline void png_warning_silent(png_structp, png_const_charp) {}
[[noreturn]] inline void png_error_silent(png_structp png, png_const_charp) { png_longjmp(png, 1); }

inline ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_silent,
                                           png_warning_silent);
  if (!png) fail(Errc::IoFailure, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::IoFailure, "png_create_info_struct failed");
  }
  ByteReader reader{&bytes, 0};
  // Declared before setjmp so longjmp does not skip their construction.
  std::vector<std::uint8_t> data;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  std::size_t channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::CorruptStream, "invalid or truncated PNG data");
  }
  png_set_read_fn(png, &reader, png_read_from_memory);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::UnsupportedFormat, "unsupported PNG channel layout");
  }
  data.resize(static_cast<std::size_t>(w) * h * channels);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return ImageBuffer(w, h, channels, channels == 1 ? ColorSpace::Gray : ColorSpace::RGB,
                     std::move(data));
}

// Netpbm header token reader; skips whitespace and '#' comments.
inline std::size_t pnm_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) fail(Errc::CorruptStream, "malformed PNM header");
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos++] - '0');
    if (v > (1u << 28)) fail(Errc::CorruptStream, "PNM header value too large");
  }
  return v;
}

inline ImageBuffer decode_pnm(const std::vector<std::uint8_t>& b) {
  const std::size_t channels = b[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  const std::size_t w = pnm_token(b, pos);
  const std::size_t h = pnm_token(b, pos);
  const std::size_t maxval = pnm_token(b, pos);
  if (w == 0 || h == 0) fail(Errc::CorruptStream, "PNM with zero dimension");
  if (maxval != 255) fail(Errc::UnsupportedFormat, "only 8-bit PNM (maxval 255) is supported");
  if (pos >= b.size() || !std::isspace(b[pos])) fail(Errc::CorruptStream, "malformed PNM header");
  ++pos;
  const std::size_t n = w * h * channels;
  if (b.size() - pos < n) fail(Errc::CorruptStream, "truncated PNM raster");
  std::vector<std::uint8_t> data(b.begin() + static_cast<std::ptrdiff_t>(pos),
                                 b.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return ImageBuffer(w, h, channels, channels == 1 ? ColorSpace::Gray : ColorSpace::RGB,
                     std::move(data));
}

}  // namespace detail

inline ImageBuffer decode_image(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSig), std::end(kPngSig), bytes.begin()))
    return detail::decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5'))
    return detail::decode_pnm(bytes);
  fail(Errc::UnsupportedFormat, "not a PNG or binary PPM/PGM stream");
}

inline ImageBuffer read_image(const std::filesystem::path& path) {
  return decode_image(detail::slurp(path));
}

// Lossless PNG. A YCbCr-tagged buffer is written as plain truecolor.
inline void write_image(const ImageBuffer& img, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) fail(Errc::IoFailure, "cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            detail::png_warning_silent);
  if (!png) fail(Errc::IoFailure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::IoFailure, "png_create_info_struct failed");
  }
  std::vector<png_const_bytep> rows(img.height());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::IoFailure, "PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8,
               img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = img.width() * img.channels();
  for (std::size_t y = 0; y < img.height(); ++y) rows[y] = img.raw().data() + y * stride;
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) fail(Errc::IoFailure, "flush failed: " + path.string());
}

// Binary PPM (P6) or PGM (P5), used for test fixtures and quick inspection.
inline void write_pnm(const ImageBuffer& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot open for writing: " + path.string());
  out << (img.channels() == 3 ? "P6" : "P5") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.raw().data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) fail(Errc::IoFailure, "write failed: " + path.string());
}

}  // namespace sb::imagecore
