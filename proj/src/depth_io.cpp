#include "graspforge/depth_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "graspforge/errors.hpp"

namespace gf {

namespace {

constexpr uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back((v >> 24) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

uint32_t get_u32_be(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

uint32_t get_u32_le(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
  put_u32_be(out, static_cast<uint32_t>(data.size()));
  const size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_pos, static_cast<uInt>(4 + data.size()));
  put_u32_be(out, crc);
}

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace

std::vector<uint8_t> encode_depth_png(const DepthImage& img) {
  const int w = img.width, h = img.height;
  // Scanlines: filter byte 0 + big-endian u16 millimeters.
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(h) * (1 + 2 * w));
  for (int row = 0; row < h; ++row) {
    raw.push_back(0);
    for (int col = 0; col < w; ++col) {
      const float z = img.at(row, col);
      uint32_t mm = 0;
      if (z > 0.0f) {
        const long v = std::lround(z * 1000.0);
        mm = static_cast<uint32_t>(std::min<long>(std::max<long>(v, 0), 65535));
      }
      raw.push_back((mm >> 8) & 0xff);
      raw.push_back(mm & 0xff);
    }
  }

  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error(ErrorKind::io, "zlib compression failed");
  comp.resize(comp_size);

  std::vector<uint8_t> out(kPngSignature, kPngSignature + 8);
  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(w));
  put_u32_be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(16);  // bit depth
  ihdr.push_back(0);   // grayscale
  ihdr.push_back(0);   // deflate
  ihdr.push_back(0);   // adaptive filtering
  ihdr.push_back(0);   // no interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", comp);
  append_chunk(out, "IEND", {});
  return out;
}

DepthImage decode_depth_png(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0)
    throw Error(ErrorKind::io, "not a PNG file");

  int w = 0, h = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 12 <= bytes.size()) {
    const uint32_t len = get_u32_be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw Error(ErrorKind::io, "truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw Error(ErrorKind::io, "bad IHDR");
      w = static_cast<int>(get_u32_be(data));
      h = static_cast<int>(get_u32_be(data + 4));
      if (data[8] != 16 || data[9] != 0 || data[12] != 0)
        throw Error(ErrorKind::io, "unsupported PNG layout (need 16-bit grayscale)");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || w <= 0 || h <= 0) throw Error(ErrorKind::io, "PNG missing IHDR");

  const size_t stride = 1 + 2 * static_cast<size_t>(w);
  std::vector<uint8_t> raw(stride * h);
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size())
    throw Error(ErrorKind::io, "PNG inflate failed");

  // Undo scanline filters; bytes-per-pixel is 2.
  for (int row = 0; row < h; ++row) {
    uint8_t* line = &raw[row * stride];
    const uint8_t filter = line[0];
    uint8_t* cur = line + 1;
    const uint8_t* prev = row > 0 ? &raw[(row - 1) * stride] + 1 : nullptr;
    for (int i = 0; i < 2 * w; ++i) {
      const int a = i >= 2 ? cur[i - 2] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= 2) ? prev[i - 2] : 0;
      switch (filter) {
        case 0: break;
        case 1: cur[i] = static_cast<uint8_t>(cur[i] + a); break;
        case 2: cur[i] = static_cast<uint8_t>(cur[i] + b); break;
        case 3: cur[i] = static_cast<uint8_t>(cur[i] + (a + b) / 2); break;
        case 4: cur[i] = static_cast<uint8_t>(cur[i] + paeth(a, b, c)); break;
        default: throw Error(ErrorKind::io, "unknown PNG filter type");
      }
    }
  }

  DepthImage img(w, h);
  for (int row = 0; row < h; ++row) {
    const uint8_t* cur = &raw[row * stride] + 1;
    for (int col = 0; col < w; ++col) {
      const uint32_t mm = (uint32_t(cur[2 * col]) << 8) | cur[2 * col + 1];
      img.at(row, col) = mm == 0 ? 0.0f : static_cast<float>(mm) / 1000.0f;
    }
  }
  return img;
}

std::vector<uint8_t> encode_depth_raw(const DepthImage& img) {
  std::vector<uint8_t> out;
  out.reserve(16 + img.pixels.size() * 4);
  out.insert(out.end(), {'G', 'F', 'D', 'I'});
  put_u32_le(out, static_cast<uint32_t>(img.width));
  put_u32_le(out, static_cast<uint32_t>(img.height));
  put_u32_le(out, 0);
  for (float z : img.pixels) {
    uint32_t bits;
    static_assert(sizeof(bits) == sizeof(z));
    std::memcpy(&bits, &z, 4);
    put_u32_le(out, bits);
  }
  return out;
}

DepthImage decode_depth_raw(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "GFDI", 4) != 0)
    throw Error(ErrorKind::io, "not a GFDI file");
  const uint32_t w = get_u32_le(&bytes[4]);
  const uint32_t h = get_u32_le(&bytes[8]);
  if (bytes.size() != 16 + static_cast<size_t>(w) * h * 4)
    throw Error(ErrorKind::io, "GFDI size mismatch");
  DepthImage img(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    const uint32_t bits = get_u32_le(&bytes[16 + 4 * i]);
    float z;
    std::memcpy(&z, &bits, 4);
    img.pixels[i] = z;
  }
  return img;
}

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save_depth(const DepthImage& img, const std::string& path) {
  const std::vector<uint8_t> bytes =
      has_suffix(path, ".gfdi") ? encode_depth_raw(img) : encode_depth_png(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::io, "write failed: " + path);
}

DepthImage load_depth(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open depth file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (has_suffix(path, ".gfdi")) return decode_depth_raw(bytes);
  return decode_depth_png(bytes);
}

}  // namespace gf
