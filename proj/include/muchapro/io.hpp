#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "muchapro/projection.hpp"
#include "muchapro/types.hpp"

namespace muchapro {

// Binary rasters are little-endian regardless of platform. Values are stored
// as 32-bit floats on disk and widened to 64-bit in memory.
//
// .mcslc  multi-channel SLC image
//   "MCSL" | version u8 = 1 | d, height, width u32 | d*h*w complex values as
//   interleaved (re, im) f32 pairs, channel-major then row-major.
//
// .mccov  covariance field (also the reflectivity raster when d = 1)
//   "MCCV" | version u8 = 1 | d, height, width u32 | d^2 planes of h*w f32,
//   plane-major then row-major, planes ordered as the real Hermitian
//   parameterization (diagonals, Re upper triangle, Im upper triangle).

void write_mcslc(std::ostream& out, const MultiChannelImage& img);
void write_mcslc(const std::string& path, const MultiChannelImage& img);
MultiChannelImage read_mcslc(std::istream& in, const std::string& what = "<stream>");
MultiChannelImage read_mcslc(const std::string& path);

void write_mccov(std::ostream& out, const CovarianceField& field);
void write_mccov(const std::string& path, const CovarianceField& field);
CovarianceField read_mccov(std::istream& in, const std::string& what = "<stream>");
CovarianceField read_mccov(const std::string& path);

/// Reflectivity raster: a d = 1 covariance file.
void write_refl(const std::string& path, const RArray& img);
RArray read_refl(const std::string& path);

/// Structured-text direction file: dimensions, mode, seed provenance, the
/// achieved condition number, then one line of re/im pairs per direction.
struct DirectionFile {
  DirectionSet dirs;
  OperatorMode mode = OperatorMode::hermitian_real;
  std::uint64_t seed = 0;
  std::string provenance;
  double stored_condition = 0.0;
};

void write_direction_file(std::ostream& out, const DirectionFile& df);
void write_direction_file(const std::string& path, const DirectionFile& df);
/// Parses and re-checks that the stored condition number matches the
/// recomputed one within 1e-6.
DirectionFile read_direction_file(std::istream& in, const std::string& what = "<stream>");
DirectionFile read_direction_file(const std::string& path);

struct RgbImage {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major
};

enum class CompositeMode { insar, amplitude };

struct CompositeSpec {
  CompositeMode mode = CompositeMode::insar;
  Index channel_i = 0;
  Index channel_j = 1;  // insar only
  double clip_quantile = 0.99;
  double gamma = 0.7;
};

/// insar: hue = interferometric phase, saturation = coherence (clipped to
/// [0, 1]), value = channel_i reflectivity after a quantile stretch.
/// amplitude: grayscale sqrt-reflectivity with the same stretch.
RgbImage render_composite(const CovarianceField& field, const CompositeSpec& spec);

/// Minimal RGB8 PNG writer (deterministic output for fixed input).
void write_png(const std::string& path, const RgbImage& img);

}  // namespace muchapro
