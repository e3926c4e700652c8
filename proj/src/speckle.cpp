#include "muchapro/speckle.hpp"

#include <cmath>

#include "muchapro/hermitian.hpp"
#include "muchapro/parallel.hpp"
#include "muchapro/rng.hpp"

namespace muchapro {

namespace {

// A with A A^H = C. Cholesky when possible; semidefinite matrices fall back
// to the eigendecomposition with negative eigenvalues clipped at zero.
// Returns false when C is indefinite beyond tolerance.
bool speckle_factor(const Eigen::MatrixXcd& c, Eigen::LLT<Eigen::MatrixXcd>& llt,
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>& eig,
                    Eigen::MatrixXcd& a) {
  llt.compute(c);
  if (llt.info() == Eigen::Success) {
    a = llt.matrixL();
    return true;
  }
  eig.compute(c);
  const auto& ev = eig.eigenvalues();
  const double lmax = std::max(0.0, ev.maxCoeff());
  if (ev.minCoeff() < -1e-10 * std::max(lmax, 1e-300)) return false;
  a = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return true;
}

}  // namespace

MultiChannelImage sample_goodman(const CovarianceField& truth, std::uint64_t seed,
                                 int jobs) {
  const Index d = truth.d, h = truth.height(), w = truth.width();
  MultiChannelImage img = MultiChannelImage::zeros(d, h, w);
  const Index n = h * w;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  parallel_for(n, jobs, [&](Index begin, Index end) {
    Eigen::LLT<Eigen::MatrixXcd> llt(d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(d);
    Eigen::MatrixXcd a(d, d), c(d, d);
    Eigen::VectorXcd wvec(d), z(d);
    for (Index l = begin; l < end; ++l) {
      const Index r = l / w, col = l % w;
      c = truth.matrix_at(r, col);
      if (!speckle_factor(c, llt, eig, a)) {
        throw InvalidInput("sample_goodman: covariance at pixel (" + std::to_string(r) +
                           "," + std::to_string(col) + ") is not positive semi-definite");
      }
      SubstreamRng rng(seed, static_cast<std::uint64_t>(l));
      for (Index k = 0; k < d; ++k) {
        double re, im;
        rng.next_normal_pair(re, im);
        wvec(k) = Complex(re * inv_sqrt2, im * inv_sqrt2);
      }
      z.noalias() = a * wvec;
      for (Index k = 0; k < d; ++k) img.channels[static_cast<size_t>(k)](r, col) = z(k);
    }
  });
  return img;
}

MultiChannelImage apply_transfer(const MultiChannelImage& img, const TransferKernel& k) {
  k.validate();
  MultiChannelImage out;
  out.channels.reserve(img.channels.size());
  for (const auto& ch : img.channels) out.channels.push_back(convolve_mirror(ch, k.kernel));
  return out;
}

MultiChannelImage decimate(const MultiChannelImage& img, Index factor) {
  require(factor >= 1, "decimation factor must be >= 1");
  if (factor == 1) return img;
  const Index h = (img.height() + factor - 1) / factor;
  const Index w = (img.width() + factor - 1) / factor;
  MultiChannelImage out = MultiChannelImage::zeros(img.d(), h, w);
  for (Index d = 0; d < img.d(); ++d)
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c)
        out.channels[static_cast<size_t>(d)](r, c) =
            img.channels[static_cast<size_t>(d)](r * factor, c * factor);
  return out;
}

double fringe_phase(const PhantomSpec& spec, Index row, Index col) {
  const double cycles = spec.freq_x * static_cast<double>(col) +
                        spec.freq_y * static_cast<double>(row);
  double ph = std::remainder(2.0 * M_PI * cycles, 2.0 * M_PI);
  if (ph <= -M_PI) ph = M_PI;
  return ph;
}

namespace {

void check_psd(const Eigen::MatrixXcd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m);
  const double lmax = std::max(0.0, eig.eigenvalues().maxCoeff());
  require(eig.eigenvalues().minCoeff() >= -1e-12 * std::max(lmax, 1.0),
          std::string(what) + ": region covariance must be positive semi-definite");
}

}  // namespace

CovarianceField make_phantom(const PhantomSpec& spec) {
  require(spec.height >= 1 && spec.width >= 1, "phantom needs positive dimensions");
  switch (spec.kind) {
    case PhantomKind::constant: {
      require(spec.matrices.size() == 1, "constant phantom needs exactly one matrix");
      require(spec.matrices[0].rows() == spec.d, "phantom matrix dimension mismatch");
      check_psd(spec.matrices[0], "constant phantom");
      return CovarianceField::constant(spec.matrices[0], spec.height, spec.width);
    }
    case PhantomKind::fringes: {
      require(spec.d == 2, "fringe phantom is two-channel");
      require(spec.reflectivity > 0.0, "fringe phantom needs reflectivity > 0");
      require(spec.coherence_lo >= 0.0 && spec.coherence_lo <= 1.0 &&
                  spec.coherence_hi >= 0.0 && spec.coherence_hi <= 1.0,
              "coherence must lie in [0, 1]");
      CovarianceField f = CovarianceField::zeros(2, spec.height, spec.width);
      const double r = spec.reflectivity;
      for (Index row = 0; row < spec.height; ++row) {
        for (Index col = 0; col < spec.width; ++col) {
          const double x = spec.width > 1
                               ? static_cast<double>(col) / static_cast<double>(spec.width - 1)
                               : 0.0;
          const double coh = spec.coherence_lo + (spec.coherence_hi - spec.coherence_lo) * x;
          const double ph = fringe_phase(spec, row, col);
          f.planes[0](row, col) = r;
          f.planes[1](row, col) = r;
          f.planes[2](row, col) = r * coh * std::cos(ph);
          f.planes[3](row, col) = r * coh * std::sin(ph);
        }
      }
      return f;
    }
    case PhantomKind::mosaic: {
      require(!spec.matrices.empty(), "mosaic phantom needs at least one matrix");
      for (const auto& m : spec.matrices) {
        require(m.rows() == spec.d && m.cols() == spec.d, "phantom matrix dimension mismatch");
        check_psd(m, "mosaic phantom");
      }
      // tile the matrices over a near-square grid, row-major
      const Index n = static_cast<Index>(spec.matrices.size());
      const Index gcols = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n))));
      const Index grows = (n + gcols - 1) / gcols;
      CovarianceField f = CovarianceField::zeros(spec.d, spec.height, spec.width);
      std::vector<Eigen::VectorXd> params;
      params.reserve(static_cast<size_t>(n));
      for (const auto& m : spec.matrices) params.push_back(vectorize_hermitian(m));
      for (Index row = 0; row < spec.height; ++row) {
        for (Index col = 0; col < spec.width; ++col) {
          const Index gr = std::min(grows - 1, row * grows / spec.height);
          const Index gc = std::min(gcols - 1, col * gcols / spec.width);
          const Index which = std::min<Index>(n - 1, gr * gcols + gc);
          f.set_params_at(row, col, params[static_cast<size_t>(which)]);
        }
      }
      return f;
    }
  }
  throw InvalidInput("make_phantom: unknown phantom kind");
}

}  // namespace muchapro
