#include "labelsynth/png_io.hpp"

#include <png.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "labelsynth/error.hpp"

namespace labelsynth::png {

namespace {

struct Reader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

void read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<Reader*>(png_get_io_ptr(png));
  if (r->offset + n > r->size) png_error(png, "truncated PNG");
  std::memcpy(out, r->data + r->offset, n);
  r->offset += n;
}

void write_fn(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}

void flush_fn(png_structp) {}

// libpng reports errors by longjmp; these functions keep every C++ object
// alive across the setjmp point so unwinding skips only C frames.
bool encode_impl(const Raster& r, std::vector<std::uint8_t>& out, std::vector<png_bytep>& rows,
                 std::vector<std::uint8_t>& buffer) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    return false;
  }
  png_set_write_fn(png, &out, write_fn, flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), r.bit_depth,
               r.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  (void)buffer;
  return true;
}

bool decode_impl(Reader& reader, Raster& r, std::vector<std::uint8_t>& buffer, std::vector<png_bytep>& rows) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, read_fn);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  r.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(r.height));
  rows.resize(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode(const Raster& r) {
  if (r.bit_depth != 8 && r.bit_depth != 16) throw Error("PNG bit depth must be 8 or 16");
  if (r.channels != 1 && r.channels != 3) throw Error("PNG channels must be 1 or 3");
  if (r.height < 1 || r.width < 1) throw ShapeError("PNG with empty dims");
  const std::size_t n = static_cast<std::size_t>(r.height) * r.width * r.channels;
  if (r.samples.size() != n) throw ShapeError("PNG sample count does not match dims");
  const std::size_t bytes_per = r.bit_depth / 8;
  std::vector<std::uint8_t> buffer(n * bytes_per);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = r.samples[i];
    if (r.bit_depth == 8) {
      if (v > 255) throw Error("8-bit PNG sample out of range: " + std::to_string(v));
      buffer[i] = static_cast<std::uint8_t>(v);
    } else {
      buffer[2 * i] = static_cast<std::uint8_t>(v >> 8);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  const std::size_t stride = static_cast<std::size_t>(r.width) * r.channels * bytes_per;
  for (int y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + stride * static_cast<std::size_t>(y);
  std::vector<std::uint8_t> out;
  if (!encode_impl(r, out, rows, buffer)) throw Error("PNG encode failed");
  return out;
}

Raster decode(const std::uint8_t* data, std::size_t size) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) throw Error("not a PNG stream");
  Reader reader{data, size, 0};
  Raster r;
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  if (!decode_impl(reader, r, buffer, rows)) throw Error("malformed PNG stream");
  const std::size_t n = static_cast<std::size_t>(r.height) * r.width * r.channels;
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    r.samples[i] = r.bit_depth == 16 ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]) : buffer[i];
  return r;
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void write_file(const std::string& path, const Raster& raster) { write_bytes_atomic(path, encode(raster)); }

Raster read_file(const std::string& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode(bytes);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace labelsynth::png
