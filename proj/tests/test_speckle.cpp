#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "muchapro/hermitian.hpp"
#include "muchapro/speckle.hpp"
#include "oracles.hpp"

using namespace muchapro;

namespace {

double pearson(const RArray& a, const RArray& b) {
  const double ma = a.mean(), mb = b.mean();
  const double num = ((a - ma) * (b - mb)).sum();
  return num / std::sqrt((a - ma).square().sum() * (b - mb).square().sum());
}

}  // namespace

TEST_CASE("zero covariance field samples to the zero image") {
  const CovarianceField truth = CovarianceField::zeros(2, 8, 8);
  const MultiChannelImage img = sample_goodman(truth, 1);
  for (const auto& ch : img.channels) CHECK(ch.abs().maxCoeff() == 0.0);
}

TEST_CASE("identity covariance: intensity moments match the exponential law") {
  const Index h = 400, w = 250;  // 1e5 pixels
  const CovarianceField truth = CovarianceField::constant(Eigen::MatrixXcd::Identity(2, 2), h, w);
  const MultiChannelImage img = sample_goodman(truth, 42);
  for (const auto& ch : img.channels) {
    const RArray intensity = ch.abs2();
    const double mean = intensity.mean();
    const double sd = std::sqrt((intensity - mean).square().mean());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(sd / mean == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("constant covariance: empirical covariance within 2% relative Frobenius") {
  Eigen::MatrixXcd c(2, 2);
  c << Complex(2.0, 0.0), Complex(0.8, 0.6), Complex(0.8, -0.6), Complex(1.0, 0.0);
  const Index h = 400, w = 250;
  const CovarianceField truth = CovarianceField::constant(c, h, w);
  const MultiChannelImage img = sample_goodman(truth, 7);

  Eigen::MatrixXcd emp = Eigen::MatrixXcd::Zero(2, 2);
  for (Index l = 0; l < h * w; ++l) {
    Eigen::VectorXcd z(2);
    z << img.channels[0].data()[l], img.channels[1].data()[l];
    emp += z * z.adjoint();
  }
  emp /= static_cast<double>(h * w);
  CHECK((emp - c).norm() / c.norm() < 0.02);
}

TEST_CASE("real and imaginary parts of each channel are empirically decorrelated") {
  Eigen::MatrixXcd c(2, 2);
  c << Complex(1.0, 0.0), Complex(0.5, 0.4), Complex(0.5, -0.4), Complex(1.5, 0.0);
  const Index h = 256, w = 256;
  const CovarianceField truth = CovarianceField::constant(c, h, w);
  const MultiChannelImage img = sample_goodman(truth, 99);
  const double bound = 4.0 / std::sqrt(static_cast<double>(h * w));
  for (const auto& ch : img.channels) {
    CHECK(std::abs(pearson(ch.real(), ch.imag())) < bound);
  }
}

TEST_CASE("same seed gives bit-identical output, independent of worker count") {
  PhantomSpec spec;
  spec.kind = PhantomKind::fringes;
  spec.d = 2;
  spec.height = 32;
  spec.width = 48;
  spec.freq_x = 0.05;
  spec.coherence_lo = 0.3;
  spec.coherence_hi = 0.9;
  const CovarianceField truth = make_phantom(spec);

  const MultiChannelImage a = sample_goodman(truth, 1234, 1);
  const MultiChannelImage b = sample_goodman(truth, 1234, 4);
  for (size_t d = 0; d < a.channels.size(); ++d) {
    CHECK(std::memcmp(a.channels[d].data(), b.channels[d].data(),
                      sizeof(Complex) * static_cast<size_t>(a.channels[d].size())) == 0);
  }
  const MultiChannelImage c = sample_goodman(truth, 1235, 1);
  CHECK(std::memcmp(a.channels[0].data(), c.channels[0].data(),
                    sizeof(Complex) * static_cast<size_t>(a.channels[0].size())) != 0);
}

TEST_CASE("coherence-1 fringes (singular covariance) sample through the eigen fallback") {
  PhantomSpec spec;
  spec.kind = PhantomKind::fringes;
  spec.d = 2;
  spec.height = 64;
  spec.width = 64;
  spec.freq_x = 1.0 / 32.0;
  spec.coherence_lo = 1.0;
  spec.coherence_hi = 1.0;
  const CovarianceField truth = make_phantom(spec);
  const MultiChannelImage img = sample_goodman(truth, 5);
  img.validate();
  // at coherence 1 the two channels differ only by the deterministic phase
  for (Index l = 0; l < img.pixels(); ++l) {
    const Complex z0 = img.channels[0].data()[l];
    const Complex z1 = img.channels[1].data()[l];
    // the second eigenvalue of the rank-1 truth is zero only up to rounding
    // (~1e-16), so amplitudes agree to its square root
    CHECK(std::abs(std::abs(z0) - std::abs(z1)) < 1e-6);
  }
}

TEST_CASE("indefinite covariance is rejected naming the pixel") {
  CovarianceField truth = CovarianceField::constant(Eigen::MatrixXcd::Identity(2, 2), 4, 4);
  Eigen::MatrixXcd bad(2, 2);
  bad << Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(-1, 0);
  truth.set_matrix_at(1, 2, bad);
  CHECK_THROWS_WITH_AS(sample_goodman(truth, 1, 1), doctest::Contains("(1,2)"), InvalidInput);
}

TEST_CASE("transfer kernel: delta is the identity, constants stay constant") {
  const CovarianceField truth = CovarianceField::constant(Eigen::MatrixXcd::Identity(2, 2), 16, 16);
  const MultiChannelImage img = sample_goodman(truth, 3);

  const MultiChannelImage same = apply_transfer(img, TransferKernel{delta_kernel()});
  for (size_t d = 0; d < img.channels.size(); ++d)
    CHECK((same.channels[d] - img.channels[d]).abs().maxCoeff() == 0.0);

  MultiChannelImage flat = MultiChannelImage::zeros(1, 16, 16);
  flat.channels[0].setConstant(Complex(2.0, -1.0));
  const MultiChannelImage smoothed = apply_transfer(flat, TransferKernel{boxcar_kernel(5)});
  CHECK((smoothed.channels[0] - flat.channels[0]).abs().maxCoeff() < 1e-14);
}

TEST_CASE("transfer kernel must have unit DC gain and fit inside the image") {
  Kernel2D k = boxcar_kernel(3);
  k.coeffs *= 2.0;
  const MultiChannelImage img = MultiChannelImage::zeros(1, 8, 8);
  CHECK_THROWS_AS(apply_transfer(img, TransferKernel{k}), InvalidInput);

  const MultiChannelImage tiny = MultiChannelImage::zeros(1, 2, 2);
  CHECK_THROWS_AS(apply_transfer(tiny, TransferKernel{boxcar_kernel(5)}), InvalidInput);
}

TEST_CASE("filtered white speckle has the kernel's autocorrelation") {
  // derive the expected lag-1 correlations directly from the kernel
  Kernel2D k;
  k.coeffs = RArray(3, 3);
  k.coeffs << 1, 2, 1, 2, 4, 2, 1, 2, 1;
  k.coeffs /= k.coeffs.sum();

  double lag0 = 0.0, lag01 = 0.0, lag10 = 0.0;
  for (Index u = 0; u < 3; ++u)
    for (Index v = 0; v < 3; ++v) {
      lag0 += k.coeffs(u, v) * k.coeffs(u, v);
      if (v + 1 < 3) lag01 += k.coeffs(u, v) * k.coeffs(u, v + 1);
      if (u + 1 < 3) lag10 += k.coeffs(u, v) * k.coeffs(u + 1, v);
    }
  const double expected01 = lag01 / lag0;
  const double expected10 = lag10 / lag0;

  const Index h = 256, w = 256;
  const CovarianceField truth = CovarianceField::constant(Eigen::MatrixXcd::Identity(1, 1), h, w);
  const MultiChannelImage img = apply_transfer(sample_goodman(truth, 2024), TransferKernel{k});
  const CArray& s = img.channels[0];

  auto corr = [&](Index dr, Index dc) {
    Complex acc(0, 0);
    double norm = 0.0;
    for (Index r = 0; r + dr < h; ++r)
      for (Index c = 0; c + dc < w; ++c) {
        acc += s(r, c) * std::conj(s(r + dr, c + dc));
        norm += std::norm(s(r, c));
      }
    return (acc / norm).real();
  };
  CHECK(corr(0, 1) == doctest::Approx(expected01).epsilon(0.05));
  CHECK(corr(1, 0) == doctest::Approx(expected10).epsilon(0.05));
}

TEST_CASE("constant phantom: identical matrices everywhere") {
  PhantomSpec spec;
  spec.kind = PhantomKind::constant;
  spec.d = 2;
  spec.height = 8;
  spec.width = 8;
  spec.matrices.push_back(Eigen::MatrixXcd::Identity(2, 2));
  const CovarianceField f = make_phantom(spec);
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 8; ++c)
      CHECK((f.matrix_at(r, c) - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fringe phantom: the ramp wraps after exactly 1/fx columns") {
  PhantomSpec spec;
  spec.kind = PhantomKind::fringes;
  spec.d = 2;
  spec.height = 4;
  spec.width = 40;
  spec.freq_x = 1.0 / 32.0;
  spec.coherence_lo = spec.coherence_hi = 1.0;
  const CovarianceField f = make_phantom(spec);
  const Complex c0(f.planes[2](0, 0), f.planes[3](0, 0));
  const Complex c32(f.planes[2](0, 32), f.planes[3](0, 32));
  CHECK(std::arg(c32 * std::conj(c0)) == doctest::Approx(0.0).epsilon(1e-12));
  // quarter period: pi/2
  const Complex c8(f.planes[2](0, 8), f.planes[3](0, 8));
  CHECK(std::arg(c8 * std::conj(c0)) == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("every phantom pixel passes the eigenvalue PSD oracle") {
  std::vector<PhantomSpec> specs;
  {
    PhantomSpec s;
    s.kind = PhantomKind::fringes;
    s.d = 2;
    s.height = 16;
    s.width = 16;
    s.freq_x = 0.07;
    s.freq_y = 0.02;
    s.coherence_lo = 0.2;
    s.coherence_hi = 1.0;
    specs.push_back(s);
  }
  {
    PhantomSpec s;
    s.kind = PhantomKind::mosaic;
    s.d = 2;
    s.height = 16;
    s.width = 16;
    std::mt19937 gen(5);
    s.matrices = {oracles::random_psd(2, gen), oracles::random_psd(2, gen),
                  oracles::random_psd(2, gen)};
    specs.push_back(s);
  }
  for (const auto& spec : specs) {
    const CovarianceField f = make_phantom(spec);
    for (Index r = 0; r < f.height(); ++r)
      for (Index c = 0; c < f.width(); ++c)
        CHECK(oracles::min_eigenvalue(f.matrix_at(r, c)) >= -1e-12);
  }
}

TEST_CASE("mosaic phantom paints distinct rectangular regions") {
  PhantomSpec spec;
  spec.kind = PhantomKind::mosaic;
  spec.d = 1;
  spec.height = 10;
  spec.width = 10;
  Eigen::MatrixXcd a(1, 1), b(1, 1);
  a << Complex(1, 0);
  b << Complex(4, 0);
  spec.matrices = {a, b};
  const CovarianceField f = make_phantom(spec);
  CHECK(f.planes[0](0, 0) == 1.0);
  CHECK(f.planes[0](0, 9) == 4.0);
}

TEST_CASE("unknown phantom kind is rejected") {
  PhantomSpec spec;
  spec.kind = static_cast<PhantomKind>(99);
  spec.height = spec.width = 4;
  CHECK_THROWS_AS(make_phantom(spec), InvalidInput);
}

TEST_CASE("decimation keeps every n-th pixel") {
  MultiChannelImage img = MultiChannelImage::zeros(1, 6, 8);
  for (Index r = 0; r < 6; ++r)
    for (Index c = 0; c < 8; ++c) img.channels[0](r, c) = Complex(r, c);
  const MultiChannelImage half = decimate(img, 2);
  CHECK(half.height() == 3);
  CHECK(half.width() == 4);
  CHECK(half.channels[0](1, 2) == Complex(2, 4));
}
