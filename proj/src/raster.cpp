#include "dorsal/raster.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dorsal {

Raster::Raster(int w, int h, int c, float fill) : width(w), height(h), channels(c) {
  if (w <= 0 || h <= 0 || c <= 0) throw DimensionError("raster dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill);
}

namespace {

class PnmReader {
 public:
  explicit PnmReader(const std::string& bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("malformed PNM header");
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 24) throw ParseError("PNM header value too large");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from the samples.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("malformed PNM header");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Raster parse_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("only binary PGM (P5) and PPM (P6) are supported");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmReader rd(bytes);
  const int w = rd.next_int();
  const int h = rd.next_int();
  const int maxval = rd.next_int();
  rd.end_header();
  if (w <= 0 || h <= 0) throw ParseError("PNM dimensions must be positive");
  if (maxval <= 0 || maxval > 65535) throw ParseError("PNM maxval out of range");

  Raster img(w, h, channels);
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t need = img.data.size() * bps;
  if (bytes.size() - rd.pos() < need) throw ParseError("PNM sample data truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + rd.pos());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const unsigned v = bps == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
    img.data[i] = static_cast<float>(v);
  }
  return img;
}

Raster read_pnm(const std::filesystem::path& path) { return parse_pnm(detail::read_text_file(path)); }

std::string encode_pnm(const Raster& image, int maxval) {
  if (image.channels != 1 && image.channels != 3) throw DimensionError("PNM output needs 1 or 3 channels");
  if (maxval <= 0 || maxval > 65535) throw InvariantError("PNM maxval out of range");
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
  const bool wide = maxval > 255;
  out.reserve(out.size() + image.data.size() * (wide ? 2 : 1));
  for (float f : image.data) {
    const double c = std::isfinite(f) ? std::clamp(std::round(static_cast<double>(f)), 0.0, double(maxval)) : 0.0;
    const auto v = static_cast<unsigned>(c);
    if (wide) out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Raster& image, int maxval) {
  detail::write_text_file(path, encode_pnm(image, maxval));
}

}  // namespace dorsal
