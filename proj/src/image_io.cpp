#include "msfcn/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "msfcn/errors.hpp"

namespace msfcn {
namespace {

struct Reader {
  std::string bytes;
  size_t pos = 0;
  std::string path;

  explicit Reader(const std::string& p) : path(p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError(p + ": cannot open file");
    bytes.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path + ": " + what + " at byte offset " +
                      std::to_string(pos));
  }

  int peek() const {
    return pos < bytes.size() ? static_cast<unsigned char>(bytes[pos]) : -1;
  }

  int get() {
    if (pos >= bytes.size()) fail("unexpected end of file");
    return static_cast<unsigned char>(bytes[pos++]);
  }

  // Skips whitespace and '#' comments between header tokens.
  void skip_space() {
    for (;;) {
      int c = peek();
      if (c == '#') {
        while (peek() != '\n' && peek() != -1) ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        return;
      }
    }
  }

  int64_t read_int() {
    skip_space();
    if (peek() < '0' || peek() > '9') fail("expected integer");
    int64_t v = 0;
    while (peek() >= '0' && peek() <= '9') {
      v = v * 10 + (get() - '0');
      if (v > 1'000'000'000) fail("integer out of range");
    }
    return v;
  }
};

// Returns raw pixel bytes of a P5/P6 file plus its dimensions.
std::vector<uint8_t> read_pnm(const std::string& path, char expected_kind,
                              int64_t channels, int64_t* h, int64_t* w,
                              int64_t* maxval) {
  Reader r(path);
  if (r.get() != 'P' || r.get() != expected_kind)
    throw FormatError(path + ": bad magic, expected P" +
                      std::string(1, expected_kind) + " at byte offset 0");
  *w = r.read_int();
  *h = r.read_int();
  *maxval = r.read_int();
  if (*w < 1 || *h < 1) r.fail("non-positive image dimensions");
  if (*maxval < 1 || *maxval > 255) r.fail("unsupported maxval (8-bit only)");
  int sep = r.get();
  if (sep != '\n' && sep != ' ' && sep != '\t' && sep != '\r')
    r.fail("expected single whitespace after maxval");
  const size_t need = static_cast<size_t>(*w * *h * channels);
  if (r.bytes.size() - r.pos < need) {
    r.pos = r.bytes.size();
    r.fail("truncated payload, need " + std::to_string(need) + " bytes");
  }
  std::vector<uint8_t> out(need);
  std::copy(r.bytes.begin() + static_cast<long>(r.pos),
            r.bytes.begin() + static_cast<long>(r.pos + need), out.begin());
  return out;
}

uint8_t quantize(float v) {
  if (!(v >= 0.0f)) v = 0.0f;
  if (v > 1.0f) v = 1.0f;
  // round half up
  long q = std::lround(static_cast<double>(v) * 255.0);
  return static_cast<uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

}  // namespace

Tensor read_image(const std::string& path) {
  int64_t h = 0, w = 0, maxval = 0;
  auto raw = read_pnm(path, '6', 3, &h, &w, &maxval);
  Tensor img(Shape4(1, 3, h, w));
  const float scale = 1.0f / static_cast<float>(maxval);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        img.at(0, c, y, x) = raw[static_cast<size_t>((y * w + x) * 3 + c)] * scale;
  return img;
}

void write_image(const std::string& path, const Tensor& image) {
  const Shape4& s = image.shape;
  if (s.n != 1 || s.c != 3)
    throw ShapeError("write_image: expected shape (1,3,h,w), got " + s.str());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "P6\n" << s.w << " " << s.h << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(s.w) * 3);
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        row[static_cast<size_t>(x * 3 + c)] = quantize(image.at(0, c, y, x));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<long>(row.size()));
  }
  if (!out) throw FormatError(path + ": write failed");
}

LabelMask read_mask(const std::string& path) {
  int64_t h = 0, w = 0, maxval = 0;
  auto raw = read_pnm(path, '5', 1, &h, &w, &maxval);
  LabelMask mask(1, h, w);
  for (size_t i = 0; i < raw.size(); ++i) mask.data[i] = raw[i];
  return mask;
}

void write_mask(const std::string& path, const LabelMask& mask) {
  if (mask.n != 1)
    throw ShapeError("write_mask: expected a single mask (n=1)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "P5\n" << mask.w << " " << mask.h << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(mask.w));
  for (int64_t y = 0; y < mask.h; ++y) {
    for (int64_t x = 0; x < mask.w; ++x) {
      int32_t v = mask.at(0, y, x);
      if (v < 0 || v > 255)
        throw DataError("write_mask: label " + std::to_string(v) +
                        " not representable in 8 bits");
      row[static_cast<size_t>(x)] = static_cast<uint8_t>(v);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<long>(row.size()));
  }
  if (!out) throw FormatError(path + ": write failed");
}

}  // namespace msfcn
