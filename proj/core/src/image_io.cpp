#include "modfield/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "modfield/error.hpp"

namespace modfield {

namespace {

/// Reads whitespace-separated header tokens, skipping '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  std::string token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError(name_ + ": truncated header");
    return bytes_.substr(start, pos_ - start);
  }

  long long integer() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const long long v = std::stoll(t, &used);
      if (used != t.size()) throw FormatError(name_ + ": malformed header value '" + t + "'");
      return v;
    } catch (const std::logic_error&) {
      throw FormatError(name_ + ": malformed header value '" + t + "'");
    }
  }

  double real() {
    const std::string t = token();
    try {
      return std::stod(t);
    } catch (const std::logic_error&) {
      throw FormatError(name_ + ": malformed header value '" + t + "'");
    }
  }

  /// Consumes the single whitespace byte that ends the header.
  std::size_t payload_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError(name_ + ": missing header terminator");
    }
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::uint32_t float_bits_le(float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  return u;
}

float float_from_le(const char* p, bool little) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  const bool swap = little != (std::endian::native == std::endian::little);
  if (swap) u = __builtin_bswap32(u);
  return std::bit_cast<float>(u);
}

void check_image(const SampledSignal& s) {
  s.validate();
  if (!s.dense || s.n != 2) throw ConfigError("images must be dense 2-D signals");
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

SampledSignal decode_image(const std::string& bytes, const std::string& name) {
  HeaderReader header(bytes, name);
  const std::string magic = header.token();
  if (magic == "P6") {
    const long long w = header.integer();
    const long long h = header.integer();
    const long long maxval = header.integer();
    if (w < 1 || h < 1) throw FormatError(name + ": non-positive image size");
    if (maxval != 255) throw FormatError(name + ": only 8-bit PPM (maxval 255) is supported, got " + std::to_string(maxval));
    const std::size_t start = header.payload_start();
    const std::size_t need = static_cast<std::size_t>(w * h * 3);
    if (bytes.size() < start + need) throw FormatError(name + ": truncated PPM payload");
    SampledSignal s = SampledSignal::dense_grid({w, h}, 3);
    for (std::size_t i = 0; i < need; ++i) {
      s.values(static_cast<Eigen::Index>(i % 3), static_cast<Eigen::Index>(i / 3)) =
          static_cast<unsigned char>(bytes[start + i]) / 255.0;
    }
    return s;
  }
  if (magic == "PF" || magic == "Pf") {
    const int m = magic == "PF" ? 3 : 1;
    const long long w = header.integer();
    const long long h = header.integer();
    const double scale = header.real();
    if (w < 1 || h < 1) throw FormatError(name + ": non-positive image size");
    if (scale == 0.0 || !std::isfinite(scale)) throw FormatError(name + ": invalid PFM scale");
    const bool little = scale < 0.0;
    const std::size_t start = header.payload_start();
    const std::size_t need = static_cast<std::size_t>(w * h * m) * 4;
    if (bytes.size() < start + need) throw FormatError(name + ": truncated PFM payload");
    SampledSignal s = SampledSignal::dense_grid({w, h}, m);
    const char* p = bytes.data() + start;
    for (long long row = 0; row < h; ++row) {
      const long long y = h - 1 - row;  // bottom-to-top
      for (long long x = 0; x < w; ++x) {
        for (int c = 0; c < m; ++c, p += 4) s.values(c, y * w + x) = float_from_le(p, little);
      }
    }
    return s;
  }
  throw FormatError(name + ": unsupported image magic '" + magic + "' (expected P6, PF or Pf)");
}

SampledSignal load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path), path.string());
}

std::string encode_ppm(const SampledSignal& s) {
  check_image(s);
  if (s.m != 3 && s.m != 1) throw ConfigError("PPM output needs 1 or 3 channels");
  const std::int64_t w = s.extent[0], h = s.extent[1];
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(w * h * 3));
  for (std::int64_t j = 0; j < w * h; ++j) {
    for (int c = 0; c < 3; ++c) {
      const double v = s.values(s.m == 3 ? c : 0, j);
      const double q = std::round(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0) * 255.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
    }
  }
  return out;
}

std::string encode_pfm(const SampledSignal& s) {
  check_image(s);
  if (s.m != 3 && s.m != 1) throw ConfigError("PFM output needs 1 or 3 channels");
  const std::int64_t w = s.extent[0], h = s.extent[1];
  std::string out = std::string(s.m == 3 ? "PF" : "Pf") + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  out.reserve(out.size() + static_cast<std::size_t>(w * h * s.m * 4));
  for (std::int64_t row = 0; row < h; ++row) {
    const std::int64_t y = h - 1 - row;
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < s.m; ++c) {
        const std::uint32_t u = float_bits_le(static_cast<float>(s.values(c, y * w + x)));
        char b[4];
        std::memcpy(b, &u, 4);
        out.append(b, 4);
      }
    }
  }
  return out;
}

void save_image(const SampledSignal& signal, const std::filesystem::path& path) {
  const bool ppm = path.extension() == ".ppm";
  write_file_atomic(path, ppm ? encode_ppm(signal) : encode_pfm(signal));
}

}  // namespace modfield
