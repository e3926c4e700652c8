#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>

#include "muchapro/kernels.hpp"
#include "muchapro/types.hpp"

namespace muchapro {

/// A single-channel despeckler: one complex SLC plane in, one reflectivity
/// (mean intensity) estimate of the same size out. Implementations take the
/// complex image so that methods aware of the real/imaginary decomposition
/// can plug in; the built-in baselines only use |s|^2.
class Despeckler {
 public:
  virtual ~Despeckler() = default;
  virtual std::string name() const = 0;
  virtual RArray despeckle(const CArray& s) const = 0;
};

/// 1-look intensity |s|^2.
class IdentityDespeckler final : public Despeckler {
 public:
  std::string name() const override { return "identity"; }
  RArray despeckle(const CArray& s) const override;
};

/// Data-independent weights for linear despeckling: either a fixed
/// convolution kernel (nonnegative, unit sum, mirror boundary) or window
/// averaging weighted by an external guide image (weights depend on the
/// guide only, never on the image being filtered).
struct KernelWeights {
  Kernel2D kernel;
  void validate() const;
};

struct GuidedWeights {
  RArray guide;     // nonnegative weight map, same size as the images
  Index radius = 2; // window half-width
  void validate() const;
};

using LinearFilterWeights = std::variant<KernelWeights, GuidedWeights>;

/// Apply the weighted average defined by `weights` to a real plane.
/// This exact operator is what the linear despeckler applies to intensities,
/// so covariance-domain filtering can reuse it plane by plane.
RArray apply_linear_weights(const RArray& img, const LinearFilterWeights& weights);

class LinearDespeckler final : public Despeckler {
 public:
  explicit LinearDespeckler(LinearFilterWeights weights);
  std::string name() const override;
  RArray despeckle(const CArray& s) const override;
  const LinearFilterWeights& weights() const { return weights_; }

 private:
  LinearFilterWeights weights_;
};

/// Gaussian smoothing of log-intensity, debiased by the Euler-Mascheroni
/// constant (E[ln I] = ln v - gamma for 1-look intensity) and exponentiated.
class LogGaussianDespeckler final : public Despeckler {
 public:
  explicit LogGaussianDespeckler(double sigma,
                                 std::function<void(const std::string&)> warn = {});
  std::string name() const override;
  RArray despeckle(const CArray& s) const override;

 private:
  double sigma_;
  std::function<void(const std::string&)> warn_;
};

/// Bridge to an external despeckler process. The image is written as a
/// single-channel .mcslc file, the command is invoked as
///   <command> <input.mcslc> <output.refl>
/// and the reflectivity raster (.refl, the d = 1 covariance format) is read
/// back. Nonzero exit, malformed output or a shape mismatch raise an error
/// carrying the captured diagnostics.
class ExternalDespeckler final : public Despeckler {
 public:
  explicit ExternalDespeckler(std::string command);
  std::string name() const override;
  RArray despeckle(const CArray& s) const override;

 private:
  std::string command_;
};

/// Build a despeckler from a CLI-style spec: identity | boxcar:<side> |
/// loggauss:<sigma> | guided:<guide.refl>:<radius> | external:<command>.
std::unique_ptr<Despeckler> make_despeckler(const std::string& spec);

}  // namespace muchapro
