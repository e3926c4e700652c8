#pragma once

#include <cstdint>
#include <optional>

#include "muchapro/kernels.hpp"
#include "muchapro/types.hpp"

namespace muchapro {

/// Real-valued system response applied identically to every channel.
/// Unit DC gain keeps mean reflectivity untouched.
struct TransferKernel {
  Kernel2D kernel;

  void validate() const {
    kernel.validate();
    require(std::abs(kernel.sum() - 1.0) <= 1e-12,
            "transfer kernel must have unit DC gain");
  }
};

/// Draw one fully developed speckle realization from a per-pixel covariance
/// field: z = A w with A A^H = C and w circular white Gaussian with unit
/// per-channel power. Reproducible from (seed, pixel) substreams, so the
/// result does not depend on the worker count.
MultiChannelImage sample_goodman(const CovarianceField& truth, std::uint64_t seed,
                                 int jobs = 0);

/// Convolve every channel with the kernel (mirror boundary).
MultiChannelImage apply_transfer(const MultiChannelImage& img, const TransferKernel& k);

/// Keep every factor-th sample along both axes.
MultiChannelImage decimate(const MultiChannelImage& img, Index factor);

enum class PhantomKind { constant, fringes, mosaic };

struct PhantomSpec {
  PhantomKind kind = PhantomKind::constant;
  Index d = 1;
  Index height = 0;
  Index width = 0;

  // constant / mosaic: region covariance matrices (mosaic tiles them on a grid)
  std::vector<Eigen::MatrixXcd> matrices;

  // fringes (d = 2): reflectivity, phase ramp frequency in cycles/pixel,
  // coherence varying linearly from coherence_lo (left) to coherence_hi (right)
  double reflectivity = 1.0;
  double freq_x = 0.0;
  double freq_y = 0.0;
  double coherence_lo = 1.0;
  double coherence_hi = 1.0;
};

/// Ground-truth covariance phantoms; every pixel is Hermitian PSD.
CovarianceField make_phantom(const PhantomSpec& spec);

/// The phase ramp used by the fringe phantom, wrapped to (-pi, pi].
double fringe_phase(const PhantomSpec& spec, Index row, Index col);

}  // namespace muchapro
