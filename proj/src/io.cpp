#include "muchapro/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace muchapro {

namespace {

void put_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

void put_u32le(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_f32le(std::ostream& out, float f) {
  put_u32le(out, std::bit_cast<std::uint32_t>(f));
}

std::uint8_t get_u8(std::istream& in, const std::string& what) {
  const int c = in.get();
  require(c != std::char_traits<char>::eof(), what + ": truncated file");
  return static_cast<std::uint8_t>(c);
}

std::uint32_t get_u32le(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.gcount() == 4, what + ": truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void read_f32_block(std::istream& in, const std::string& what, std::vector<float>& buf) {
  std::vector<unsigned char> raw(buf.size() * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(in.gcount() == static_cast<std::streamsize>(raw.size()), what + ": truncated payload");
  for (size_t i = 0; i < buf.size(); ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                            (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    buf[i] = std::bit_cast<float>(u);
  }
}

void check_magic(std::istream& in, const char* magic, const std::string& what) {
  char got[4];
  in.read(got, 4);
  require(in.gcount() == 4 && std::memcmp(got, magic, 4) == 0,
          what + ": bad magic, expected '" + magic + "'");
  const std::uint8_t version = get_u8(in, what);
  require(version == 1, what + ": unsupported version " + std::to_string(version));
}

void check_trailing(std::istream& in, const std::string& what) {
  in.peek();
  require(in.eof(), what + ": trailing bytes after payload");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open '" + path + "' for writing");
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open '" + path + "' for reading");
  return f;
}

constexpr std::uint32_t kMaxDim = 1u << 20;

}  // namespace

void write_mcslc(std::ostream& out, const MultiChannelImage& img) {
  img.validate();
  out.write("MCSL", 4);
  put_u8(out, 1);
  put_u32le(out, static_cast<std::uint32_t>(img.d()));
  put_u32le(out, static_cast<std::uint32_t>(img.height()));
  put_u32le(out, static_cast<std::uint32_t>(img.width()));
  for (const auto& ch : img.channels) {
    const Complex* p = ch.data();
    for (Index l = 0; l < ch.size(); ++l) {
      put_f32le(out, static_cast<float>(p[l].real()));
      put_f32le(out, static_cast<float>(p[l].imag()));
    }
  }
  if (!out) throw InvalidInput("write_mcslc: stream failure");
}

void write_mcslc(const std::string& path, const MultiChannelImage& img) {
  auto f = open_out(path);
  write_mcslc(f, img);
}

MultiChannelImage read_mcslc(std::istream& in, const std::string& what) {
  check_magic(in, "MCSL", what);
  const std::uint32_t d = get_u32le(in, what);
  const std::uint32_t h = get_u32le(in, what);
  const std::uint32_t w = get_u32le(in, what);
  require(d >= 1 && h >= 1 && w >= 1, what + ": dimensions must be positive");
  require(d <= 64 && h <= kMaxDim && w <= kMaxDim, what + ": implausible dimensions");

  MultiChannelImage img = MultiChannelImage::zeros(d, h, w);
  std::vector<float> buf(2 * static_cast<size_t>(h) * w);
  for (std::uint32_t c = 0; c < d; ++c) {
    read_f32_block(in, what, buf);
    Complex* p = img.channels[c].data();
    for (size_t l = 0; l < static_cast<size_t>(h) * w; ++l)
      p[l] = Complex(buf[2 * l], buf[2 * l + 1]);
  }
  check_trailing(in, what);
  img.validate();
  return img;
}

MultiChannelImage read_mcslc(const std::string& path) {
  auto f = open_in(path);
  return read_mcslc(f, path);
}

void write_mccov(std::ostream& out, const CovarianceField& field) {
  field.validate();
  out.write("MCCV", 4);
  put_u8(out, 1);
  put_u32le(out, static_cast<std::uint32_t>(field.d));
  put_u32le(out, static_cast<std::uint32_t>(field.height()));
  put_u32le(out, static_cast<std::uint32_t>(field.width()));
  for (const auto& plane : field.planes) {
    const double* p = plane.data();
    for (Index l = 0; l < plane.size(); ++l) put_f32le(out, static_cast<float>(p[l]));
  }
  if (!out) throw InvalidInput("write_mccov: stream failure");
}

void write_mccov(const std::string& path, const CovarianceField& field) {
  auto f = open_out(path);
  write_mccov(f, field);
}

CovarianceField read_mccov(std::istream& in, const std::string& what) {
  check_magic(in, "MCCV", what);
  const std::uint32_t d = get_u32le(in, what);
  const std::uint32_t h = get_u32le(in, what);
  const std::uint32_t w = get_u32le(in, what);
  require(d >= 1 && h >= 1 && w >= 1, what + ": dimensions must be positive");
  require(d <= 64 && h <= kMaxDim && w <= kMaxDim, what + ": implausible dimensions");

  CovarianceField field = CovarianceField::zeros(d, h, w);
  std::vector<float> buf(static_cast<size_t>(h) * w);
  for (std::uint32_t p = 0; p < d * d; ++p) {
    read_f32_block(in, what, buf);
    double* dst = field.planes[p].data();
    for (size_t l = 0; l < buf.size(); ++l) dst[l] = static_cast<double>(buf[l]);
  }
  check_trailing(in, what);
  field.validate();
  return field;
}

CovarianceField read_mccov(const std::string& path) {
  auto f = open_in(path);
  return read_mccov(f, path);
}

void write_refl(const std::string& path, const RArray& img) {
  CovarianceField f;
  f.d = 1;
  f.planes.push_back(img);
  write_mccov(path, f);
}

RArray read_refl(const std::string& path) {
  CovarianceField f = read_mccov(path);
  require(f.d == 1, path + ": expected a single-plane reflectivity raster (d = 1), got d = " +
                        std::to_string(f.d));
  return f.planes[0];
}

void write_direction_file(std::ostream& out, const DirectionFile& df) {
  df.dirs.validate();
  out << "MCDIRS 1\n";
  out << "d " << df.dirs.d() << "\n";
  out << "k " << df.dirs.k() << "\n";
  out << "mode " << to_string(df.mode) << "\n";
  out << "seed " << df.seed << "\n";
  out << "provenance " << (df.provenance.empty() ? "unspecified" : df.provenance) << "\n";
  out << "cond " << std::setprecision(17) << df.stored_condition << "\n";
  out << "directions\n";
  for (Index k = 0; k < df.dirs.k(); ++k) {
    for (Index i = 0; i < df.dirs.d(); ++i) {
      if (i > 0) out << ' ';
      out << std::setprecision(17) << df.dirs.p(i, k).real() << ' '
          << std::setprecision(17) << df.dirs.p(i, k).imag();
    }
    out << '\n';
  }
  if (!out) throw InvalidInput("write_direction_file: stream failure");
}

void write_direction_file(const std::string& path, const DirectionFile& df) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open '" + path + "' for writing");
  write_direction_file(f, df);
}

DirectionFile read_direction_file(std::istream& in, const std::string& what) {
  std::string line;
  auto next_line = [&](const char* field) {
    require(static_cast<bool>(std::getline(in, line)), what + ": missing " + field);
    return line;
  };
  require(next_line("header") == "MCDIRS 1", what + ": bad direction-file header");

  DirectionFile df;
  Index d = 0, k = 0;
  auto parse_kv = [&](const char* key) {
    next_line(key);
    std::istringstream ss(line);
    std::string got;
    ss >> got;
    require(got == key, what + ": expected '" + key + "' line, got '" + line + "'");
    std::string rest;
    std::getline(ss, rest);
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    return rest;
  };

  d = static_cast<Index>(std::stoll(parse_kv("d")));
  k = static_cast<Index>(std::stoll(parse_kv("k")));
  require(d >= 1 && d <= 64 && k >= 1 && k <= 4096, what + ": implausible direction counts");
  df.mode = operator_mode_from_string(parse_kv("mode"));
  df.seed = static_cast<std::uint64_t>(std::stoull(parse_kv("seed")));
  df.provenance = parse_kv("provenance");
  df.stored_condition = std::stod(parse_kv("cond"));
  require(next_line("directions") == "directions", what + ": expected 'directions' marker");

  df.dirs.p.resize(d, k);
  for (Index col = 0; col < k; ++col) {
    next_line("direction row");
    std::istringstream ss(line);
    for (Index i = 0; i < d; ++i) {
      double re = 0, im = 0;
      require(static_cast<bool>(ss >> re >> im), what + ": malformed direction line");
      df.dirs.p(i, col) = Complex(re, im);
    }
    double extra;
    require(!(ss >> extra), what + ": too many values on direction line");
  }
  df.dirs.validate();

  const double recomputed = condition_number(df.dirs, df.mode);
  const double tol = 1e-6 * std::max(1.0, std::abs(df.stored_condition));
  const bool both_singular = std::isinf(recomputed) && std::isinf(df.stored_condition);
  require(both_singular || std::abs(recomputed - df.stored_condition) <= tol,
          what + ": stored condition number " + std::to_string(df.stored_condition) +
              " does not match recomputed " + std::to_string(recomputed));
  return df;
}

DirectionFile read_direction_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open '" + path + "' for reading");
  return read_direction_file(f, path);
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const size_t idx = static_cast<size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

void hsv_to_rgb(double h, double s, double v, std::uint8_t* rgb) {
  h = h - std::floor(h);  // wrap to [0, 1)
  const double c = v * s;
  const double hp = 6.0 * h;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(r + m, 0.0, 1.0)));
  rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(g + m, 0.0, 1.0)));
  rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(b + m, 0.0, 1.0)));
}

RArray stretch(const RArray& v, double clip_quantile, double gamma) {
  std::vector<double> vals(v.data(), v.data() + v.size());
  double hi = quantile(std::move(vals), clip_quantile);
  if (!(hi > 0.0)) hi = 1.0;
  return (v.cwiseMax(0.0) / hi).cwiseMin(1.0).pow(gamma);
}

}  // namespace

RgbImage render_composite(const CovarianceField& field, const CompositeSpec& spec) {
  const Index h = field.height(), w = field.width();
  RgbImage img;
  img.height = h;
  img.width = w;
  img.rgb.assign(static_cast<size_t>(3 * h * w), 0);

  if (spec.mode == CompositeMode::amplitude) {
    require(spec.channel_i >= 0 && spec.channel_i < field.d,
            "render_composite: channel out of range");
    const RArray amp = field.diag_plane(spec.channel_i).cwiseMax(0.0).sqrt();
    const RArray val = stretch(amp, spec.clip_quantile, spec.gamma);
    for (Index l = 0; l < h * w; ++l) {
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * val.data()[l]));
      img.rgb[static_cast<size_t>(3 * l)] = g;
      img.rgb[static_cast<size_t>(3 * l + 1)] = g;
      img.rgb[static_cast<size_t>(3 * l + 2)] = g;
    }
    return img;
  }

  require(spec.channel_i != spec.channel_j, "render_composite: insar needs two distinct channels");
  require(spec.channel_i >= 0 && spec.channel_i < field.d && spec.channel_j >= 0 &&
              spec.channel_j < field.d,
          "render_composite: channel out of range");
  const Index lo = std::min(spec.channel_i, spec.channel_j);
  const Index hi_ch = std::max(spec.channel_i, spec.channel_j);
  const Index t = upper_pair_index(field.d, lo, hi_ch);
  const RArray& re = field.re_plane(t);
  const RArray& im = field.im_plane(t);
  const RArray& di = field.diag_plane(spec.channel_i);
  const RArray& dj = field.diag_plane(spec.channel_j);
  const RArray val = stretch(di, spec.clip_quantile, spec.gamma);

  const double sign = spec.channel_i < spec.channel_j ? 1.0 : -1.0;
  for (Index l = 0; l < h * w; ++l) {
    const double denom = std::sqrt(std::max(di.data()[l], 0.0) * std::max(dj.data()[l], 0.0));
    const Complex cij(re.data()[l], sign * im.data()[l]);
    const double phase = std::arg(cij);
    const double coh = denom > 0.0 ? std::clamp(std::abs(cij) / denom, 0.0, 1.0) : 0.0;
    hsv_to_rgb((phase + M_PI) / (2.0 * M_PI), coh, val.data()[l], &img.rgb[static_cast<size_t>(3 * l)]);
  }
  return img;
}

namespace {

void png_chunk(std::ostream& out, const char type[4], const std::vector<std::uint8_t>& data) {
  auto put_be = [&](std::uint32_t v) {
    char b[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                 static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.write(b, 4);
  };
  put_be(static_cast<std::uint32_t>(data.size()));
  out.write(type, 4);
  if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()),
                               static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  put_be(static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const std::string& path, const RgbImage& img) {
  require(img.height >= 1 && img.width >= 1, "write_png: empty image");
  require(img.rgb.size() == static_cast<size_t>(3 * img.height * img.width),
          "write_png: pixel buffer size mismatch");

  // raw scanlines, filter byte 0 per row
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height) * (1 + 3 * static_cast<size_t>(img.width)));
  for (Index r = 0; r < img.height; ++r) {
    raw.push_back(0);
    const size_t off = static_cast<size_t>(3 * r * img.width);
    raw.insert(raw.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(off),
               img.rgb.begin() + static_cast<std::ptrdiff_t>(off + 3 * static_cast<size_t>(img.width)));
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  const int rc = compress2(compressed.data(), &bound, raw.data(),
                           static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION);
  if (rc != Z_OK) throw InternalError("write_png: deflate failed");
  compressed.resize(bound);

  auto f = open_out(path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr(13);
  auto put_be_at = [&](size_t at, std::uint32_t v) {
    ihdr[at] = static_cast<std::uint8_t>((v >> 24) & 0xff);
    ihdr[at + 1] = static_cast<std::uint8_t>((v >> 16) & 0xff);
    ihdr[at + 2] = static_cast<std::uint8_t>((v >> 8) & 0xff);
    ihdr[at + 3] = static_cast<std::uint8_t>(v & 0xff);
  };
  put_be_at(0, static_cast<std::uint32_t>(img.width));
  put_be_at(4, static_cast<std::uint32_t>(img.height));
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: RGB
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // interlace
  png_chunk(f, "IHDR", ihdr);
  png_chunk(f, "IDAT", compressed);
  png_chunk(f, "IEND", {});
  if (!f) throw InvalidInput("write_png: stream failure");
}

}  // namespace muchapro
