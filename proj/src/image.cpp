#include "snaplabel/image.hpp"

#include <bit>
#include <csetjmp>
#include <cstring>
#include <memory>

#include <openssl/evp.h>
#include <png.h>

#include "snaplabel/error.hpp"
#include "snaplabel/scene_io.hpp"

namespace snaplabel {

RgbImage::RgbImage(int w, int h, Rgb fill)
    : width(w), height(h), data(3 * static_cast<std::size_t>(w) * h) {
  for (std::size_t i = 0, n = static_cast<std::size_t>(w) * h; i < n; ++i) set(i, fill);
}

namespace {

struct PngWriteState {
  std::string out;
};

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out.append(reinterpret_cast<const char*>(data), len);
}

void png_flush_cb(png_structp) {}

struct PngReadState {
  const std::string* in;
  std::size_t pos = 0;
};

void png_read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + len > st->in->size()) png_error(png, "truncated PNG");
  std::memcpy(data, st->in->data() + st->pos, len);
  st->pos += len;
}

void png_warning_cb(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; every C++ object used across the
// protected region is declared before setjmp.
std::string write_png(int width, int height, int bit_depth, int color_type,
                      const std::vector<png_bytep>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_cb);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  PngWriteState st;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &st, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(st.out);
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

DecodedPng read_png(const std::string& bytes, bool want_rgb8) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8))
    throw IoError("not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_cb);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadState st{&bytes};
  DecodedPng out;
  std::vector<png_bytep> rows;
  bool wrong_kind = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decoding failed");
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_read_info(png, info);
  {
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (want_rgb8) {
      if (depth == 16) png_set_strip_16(png);
      if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
      if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
      }
      if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    } else if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
      wrong_kind = true;
    } else if (std::endian::native == std::endian::little) {
      png_set_swap(png);
    }
  }
  if (wrong_kind) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("expected a 16-bit grayscale PNG");
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  {
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.bytes.resize(rowbytes * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * rowbytes;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

std::string encode_png(const RgbImage& image) {
  std::vector<png_bytep> rows(image.height);
  auto* base = const_cast<std::uint8_t*>(image.data.data());
  for (int y = 0; y < image.height; ++y) rows[y] = base + 3 * static_cast<std::size_t>(y) * image.width;
  return write_png(image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

RgbImage decode_png(const std::string& bytes) {
  DecodedPng d = read_png(bytes, true);
  if (d.channels != 3 || d.bit_depth != 8) throw IoError("PNG did not decode to RGB8");
  RgbImage img;
  img.width = d.width;
  img.height = d.height;
  img.data = std::move(d.bytes);
  return img;
}

void save_png(const RgbImage& image, const std::filesystem::path& path) {
  write_file(path, encode_png(image));
}

RgbImage load_png(const std::filesystem::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_png16(const Gray16Image& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> be(image.data.size() * 2);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(image.data[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(image.data[i] & 0xFF);
  }
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = be.data() + 2 * static_cast<std::size_t>(y) * image.width;
  write_file(path, write_png(image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, rows));
}

Gray16Image load_png16(const std::filesystem::path& path) {
  DecodedPng d = read_png(read_file(path), false);
  Gray16Image img;
  img.width = d.width;
  img.height = d.height;
  img.data.resize(static_cast<std::size_t>(d.width) * d.height);
  std::memcpy(img.data.data(), d.bytes.data(), img.data.size() * 2);
  return img;
}

namespace {

constexpr char kDepthMagic[4] = {'D', 'P', 'T', 'H'};
constexpr std::size_t kDepthHeader = 16;

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_depth(const DepthMap& depth) {
  static_assert(std::endian::native == std::endian::little, "depth writer assumes little-endian");
  std::string out(kDepthMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(depth.width));
  put_u32(out, static_cast<std::uint32_t>(depth.height));
  put_u32(out, 0);
  const std::size_t n = depth.data.size() * sizeof(float);
  out.resize(kDepthHeader + n);
  std::memcpy(out.data() + kDepthHeader, depth.data.data(), n);
  return out;
}

DepthMap decode_depth(const std::string& bytes) {
  if (bytes.size() < kDepthHeader || std::memcmp(bytes.data(), kDepthMagic, 4) != 0)
    throw FormatError("missing DPTH header", FormatError::Unit::kByte, 0);
  DepthMap d;
  d.width = static_cast<int>(get_u32(bytes, 4));
  d.height = static_cast<int>(get_u32(bytes, 8));
  const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
  if (bytes.size() != kDepthHeader + n * sizeof(float))
    throw FormatError("depth grid size does not match header", FormatError::Unit::kByte,
                      bytes.size());
  d.data.resize(n);
  std::memcpy(d.data.data(), bytes.data() + kDepthHeader, n * sizeof(float));
  return d;
}

void save_depth(const DepthMap& depth, const std::filesystem::path& path) {
  write_file(path, encode_depth(depth));
}

DepthMap load_depth(const std::filesystem::path& path) {
  try {
    return decode_depth(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.unit(), e.offset());
  }
}

std::string base64_encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 payload length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("invalid base64 payload");
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace snaplabel
