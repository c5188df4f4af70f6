#include "cellpheno/imageio.hpp"

#include "cellpheno/util.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <vector>

namespace cellpheno::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    if (mode[0] == 'r') throw MissingImage("cannot open image: " + path.string());
    throw IoError("cannot open for write: " + path.string());
  }
  return f;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

Rgb8 read_png_rgb8(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Rgb8 out;
  out.r.resize(h, w);
  out.g.resize(h, w);
  out.b.resize(h, w);
  for (png_uint_32 y = 0; y < h; ++y) {
    const std::uint8_t* row = data.data() + static_cast<std::size_t>(y) * w * 3;
    for (png_uint_32 x = 0; x < w; ++x) {
      out.r(y, x) = row[3 * x];
      out.g(y, x) = row[3 * x + 1];
      out.b(y, x) = row[3 * x + 2];
    }
  }
  return out;
}

void write_png_rgb8(const std::filesystem::path& path, const PlaneU8& r, const PlaneU8& g,
                    const PlaneU8& b) {
  const auto h = static_cast<png_uint_32>(r.rows());
  const auto w = static_cast<png_uint_32>(r.cols());
  const std::filesystem::path tmp = path.string() + ".tmp";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    FilePtr f = open_file(tmp, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("PNG encode failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
      for (png_uint_32 x = 0; x < w; ++x) {
        row[3 * x] = r(y, x);
        row[3 * x + 1] = g(y, x);
        row[3 * x + 2] = b(y, x);
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Baseline TIFF (uncompressed, little-endian). Enough for the debug dumps and
// for ingesting tiles written by this tool or by common converters.
// ---------------------------------------------------------------------------

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_entry(std::string& s, std::uint16_t tag, std::uint16_t type, std::uint32_t count,
               std::uint32_t value) {
  put16(s, tag);
  put16(s, type);
  put32(s, count);
  put32(s, value);
}

constexpr std::uint16_t kTypeShort = 3, kTypeLong = 4;

std::string tiff_encode(std::uint32_t width, std::uint32_t height, std::uint16_t samples,
                        std::uint16_t bits, std::uint16_t sample_format,
                        const std::string& pixel_data) {
  std::string s;
  s += "II";
  put16(s, 42);
  put32(s, 8);  // IFD right after header

  const bool multi_sample = samples > 1;
  const std::uint16_t n_entries = multi_sample ? 12 : 11;
  const std::uint32_t ifd_size = 2 + n_entries * 12u + 4;
  std::uint32_t cursor = 8 + ifd_size;
  std::uint32_t bits_offset = 0;
  if (multi_sample) {  // BitsPerSample needs out-of-line storage for 3 shorts
    bits_offset = cursor;
    cursor += 2u * samples;
  }
  const std::uint32_t data_offset = cursor;

  std::string ifd;
  put16(ifd, n_entries);
  put_entry(ifd, 256, kTypeLong, 1, width);
  put_entry(ifd, 257, kTypeLong, 1, height);
  if (multi_sample) {
    put_entry(ifd, 258, kTypeShort, samples, bits_offset);
  } else {
    put_entry(ifd, 258, kTypeShort, 1, bits);
  }
  put_entry(ifd, 259, kTypeShort, 1, 1);                              // no compression
  put_entry(ifd, 262, kTypeShort, 1, multi_sample ? 2 : 1);           // RGB or BlackIsZero
  put_entry(ifd, 273, kTypeLong, 1, data_offset);                     // strip offset
  put_entry(ifd, 277, kTypeShort, 1, samples);
  put_entry(ifd, 278, kTypeLong, 1, height);                          // one strip
  put_entry(ifd, 279, kTypeLong, 1, static_cast<std::uint32_t>(pixel_data.size()));
  put_entry(ifd, 282, kTypeLong, 1, 0);                               // XResolution (unused)
  put_entry(ifd, 283, kTypeLong, 1, 0);
  put_entry(ifd, 339, kTypeShort, 1, sample_format);
  put32(ifd, 0);  // next IFD

  s += ifd;
  if (multi_sample) {
    for (int i = 0; i < samples; ++i) put16(s, bits);
  }
  s += pixel_data;
  return s;
}

struct TiffField {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::vector<std::uint32_t> values;
};

std::uint32_t rd32(const std::string& s, std::size_t off) {
  return static_cast<std::uint8_t>(s[off]) | (static_cast<std::uint8_t>(s[off + 1]) << 8) |
         (static_cast<std::uint8_t>(s[off + 2]) << 16) |
         (static_cast<std::uint8_t>(s[off + 3]) << 24);
}
std::uint16_t rd16(const std::string& s, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[off]) |
                                    (static_cast<std::uint8_t>(s[off + 1]) << 8));
}

std::map<std::uint16_t, TiffField> tiff_parse_ifd(const std::string& s) {
  if (s.size() < 8 || s[0] != 'I' || s[1] != 'I' || rd16(s, 2) != 42)
    throw IoError("not a little-endian TIFF");
  const std::uint32_t ifd = rd32(s, 4);
  if (ifd + 2 > s.size()) throw IoError("truncated TIFF IFD");
  const std::uint16_t n = rd16(s, ifd);
  std::map<std::uint16_t, TiffField> fields;
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::size_t e = ifd + 2 + static_cast<std::size_t>(i) * 12;
    TiffField f;
    const std::uint16_t tag = rd16(s, e);
    f.type = rd16(s, e + 2);
    f.count = rd32(s, e + 4);
    const std::size_t vsize = (f.type == kTypeShort ? 2 : 4) * static_cast<std::size_t>(f.count);
    std::size_t voff = (vsize <= 4) ? e + 8 : rd32(s, e + 8);
    for (std::uint32_t k = 0; k < f.count; ++k) {
      f.values.push_back(f.type == kTypeShort ? rd16(s, voff + 2 * k) : rd32(s, voff + 4 * k));
    }
    fields[tag] = std::move(f);
  }
  return fields;
}

std::uint32_t field1(const std::map<std::uint16_t, TiffField>& f, std::uint16_t tag,
                     std::uint32_t fallback) {
  auto it = f.find(tag);
  return it == f.end() || it->second.values.empty() ? fallback : it->second.values[0];
}

std::vector<std::uint8_t> tiff_strip_data(const std::string& s,
                                          const std::map<std::uint16_t, TiffField>& f) {
  auto offs = f.find(273), counts = f.find(279);
  if (offs == f.end() || counts == f.end()) throw IoError("TIFF missing strip tags");
  std::vector<std::uint8_t> data;
  for (std::size_t i = 0; i < offs->second.values.size(); ++i) {
    const std::uint32_t o = offs->second.values[i];
    const std::uint32_t c = counts->second.values[i];
    if (o + c > s.size()) throw IoError("TIFF strip out of range");
    data.insert(data.end(), s.begin() + o, s.begin() + o + c);
  }
  return data;
}

Rgb8 read_tiff_rgb8(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  const auto fields = tiff_parse_ifd(s);
  const std::uint32_t w = field1(fields, 256, 0), h = field1(fields, 257, 0);
  const std::uint32_t samples = field1(fields, 277, 1);
  const std::uint32_t compression = field1(fields, 259, 1);
  const std::uint32_t bits = field1(fields, 258, 8);
  if (compression != 1) throw IoError("unsupported TIFF compression: " + path.string());
  if (bits != 8 || (samples != 1 && samples != 3))
    throw IoError("unsupported TIFF layout (need 8-bit gray or RGB): " + path.string());
  const auto data = tiff_strip_data(s, fields);
  if (data.size() < static_cast<std::size_t>(w) * h * samples)
    throw IoError("TIFF pixel data truncated: " + path.string());
  Rgb8 out;
  out.r.resize(h, w);
  out.g.resize(h, w);
  out.b.resize(h, w);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * samples;
      out.r(y, x) = data[i];
      out.g(y, x) = data[samples == 3 ? i + 1 : i];
      out.b(y, x) = data[samples == 3 ? i + 2 : i];
    }
  }
  return out;
}

bool has_tiff_ext(const std::filesystem::path& p) {
  auto e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ".tif" || e == ".tiff";
}

}  // namespace

Rgb8 read_rgb8(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw MissingImage("cannot open image: " + path.string());
  char magic[4] = {};
  probe.read(magic, 4);
  probe.close();
  if (magic[0] == 'I' && magic[1] == 'I') return read_tiff_rgb8(path);
  return read_png_rgb8(path);
}

void write_rgb8(const std::filesystem::path& path, const PlaneU8& r, const PlaneU8& g,
                const PlaneU8& b) {
  if (r.rows() != g.rows() || r.rows() != b.rows() || r.cols() != g.cols() ||
      r.cols() != b.cols())
    throw PipelineError("write_rgb8: channel shape mismatch");
  if (has_tiff_ext(path)) {
    const auto h = static_cast<std::uint32_t>(r.rows());
    const auto w = static_cast<std::uint32_t>(r.cols());
    std::string pix(static_cast<std::size_t>(w) * h * 3, '\0');
    for (std::uint32_t y = 0; y < h; ++y)
      for (std::uint32_t x = 0; x < w; ++x) {
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
        pix[i] = static_cast<char>(r(y, x));
        pix[i + 1] = static_cast<char>(g(y, x));
        pix[i + 2] = static_cast<char>(b(y, x));
      }
    write_file_atomic(path, tiff_encode(w, h, 3, 8, 1, pix));
    return;
  }
  write_png_rgb8(path, r, g, b);
}

PlaneU16 read_gray16_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(png, info) != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("expected 16-bit grayscale PNG: " + path.string());
  }
  png_set_swap(png);  // libpng hands big-endian by default
  png_read_update_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  std::vector<std::uint16_t> data(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = reinterpret_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * w);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  PlaneU16 out(h, w);
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x) out(y, x) = data[static_cast<std::size_t>(y) * w + x];
  return out;
}

void write_gray16_png(const std::filesystem::path& path, const PlaneU16& img) {
  const auto h = static_cast<png_uint_32>(img.rows());
  const auto w = static_cast<png_uint_32>(img.cols());
  const std::filesystem::path tmp = path.string() + ".tmp";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    FilePtr f = open_file(tmp, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("PNG encode failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    std::vector<std::uint16_t> row(w);
    for (png_uint_32 y = 0; y < h; ++y) {
      for (png_uint_32 x = 0; x < w; ++x) row[x] = img(y, x);
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

void write_gray_f32_tiff(const std::filesystem::path& path, const PlaneD& img) {
  const auto h = static_cast<std::uint32_t>(img.rows());
  const auto w = static_cast<std::uint32_t>(img.cols());
  std::string pix(static_cast<std::size_t>(w) * h * 4, '\0');
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const float v = static_cast<float>(img(y, x));
      std::memcpy(pix.data() + (static_cast<std::size_t>(y) * w + x) * 4, &v, 4);
    }
  write_file_atomic(path, tiff_encode(w, h, 1, 32, 3, pix));
}

PlaneD read_gray_f32_tiff(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  const auto fields = tiff_parse_ifd(s);
  const std::uint32_t w = field1(fields, 256, 0), h = field1(fields, 257, 0);
  if (field1(fields, 259, 1) != 1 || field1(fields, 258, 8) != 32 ||
      field1(fields, 339, 1) != 3)
    throw IoError("expected uncompressed 32-bit float TIFF: " + path.string());
  const auto data = tiff_strip_data(s, fields);
  if (data.size() < static_cast<std::size_t>(w) * h * 4)
    throw IoError("TIFF pixel data truncated: " + path.string());
  PlaneD out(h, w);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      float v;
      std::memcpy(&v, data.data() + (static_cast<std::size_t>(y) * w + x) * 4, 4);
      out(y, x) = v;
    }
  return out;
}

}  // namespace cellpheno::io
