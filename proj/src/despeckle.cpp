#include "muchapro/despeckle.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "muchapro/io.hpp"

namespace muchapro {

RArray IdentityDespeckler::despeckle(const CArray& s) const {
  return s.abs2();
}

void KernelWeights::validate() const {
  kernel.validate();
  require((kernel.coeffs >= 0.0).all(), "linear filter weights must be nonnegative");
  const double sum = kernel.sum();
  require(sum != 0.0, "linear filter weights sum to zero");
  require(std::abs(sum - 1.0) <= 1e-9, "linear filter weights must sum to 1");
}

void GuidedWeights::validate() const {
  require(radius >= 0, "guided weights need radius >= 0");
  require(guide.size() > 0, "guided weights need a guide image");
  require(all_finite(guide), "guide image has non-finite values");
  require((guide >= 0.0).all(), "guide image must be nonnegative");
}

RArray apply_linear_weights(const RArray& img, const LinearFilterWeights& weights) {
  if (const auto* kw = std::get_if<KernelWeights>(&weights)) {
    kw->validate();
    return convolve_mirror(img, kw->kernel);
  }
  const auto& gw = std::get<GuidedWeights>(weights);
  gw.validate();
  require(gw.guide.rows() == img.rows() && gw.guide.cols() == img.cols(),
          "guide image dimensions do not match the image");
  const Index h = img.rows(), w = img.cols(), r = gw.radius;
  RArray out(h, w);
  for (Index row = 0; row < h; ++row) {
    for (Index col = 0; col < w; ++col) {
      double acc = 0.0, norm = 0.0;
      const Index r0 = std::max<Index>(0, row - r), r1 = std::min(h - 1, row + r);
      const Index c0 = std::max<Index>(0, col - r), c1 = std::min(w - 1, col + r);
      for (Index rr = r0; rr <= r1; ++rr)
        for (Index cc = c0; cc <= c1; ++cc) {
          acc += gw.guide(rr, cc) * img(rr, cc);
          norm += gw.guide(rr, cc);
        }
      require(norm != 0.0, "guided weights sum to zero inside a window");
      out(row, col) = acc / norm;
    }
  }
  return out;
}

LinearDespeckler::LinearDespeckler(LinearFilterWeights weights)
    : weights_(std::move(weights)) {
  std::visit([](const auto& w) { w.validate(); }, weights_);
}

std::string LinearDespeckler::name() const {
  return std::holds_alternative<KernelWeights>(weights_) ? "linear-kernel" : "linear-guided";
}

RArray LinearDespeckler::despeckle(const CArray& s) const {
  return apply_linear_weights(s.abs2(), weights_);
}

LogGaussianDespeckler::LogGaussianDespeckler(double sigma,
                                             std::function<void(const std::string&)> warn)
    : sigma_(sigma), warn_(std::move(warn)) {
  require(sigma > 0.0, "log-gaussian despeckler needs sigma > 0");
}

std::string LogGaussianDespeckler::name() const {
  std::ostringstream ss;
  ss << "loggauss:" << sigma_;
  return ss.str();
}

RArray LogGaussianDespeckler::despeckle(const CArray& s) const {
  // Euler-Mascheroni constant: E[ln I] = ln v - gamma for 1-look intensity
  constexpr double kEulerGamma = 0.57721566490153286;
  const RArray intensity = s.abs2();
  const double eps = 1e-10 * intensity.mean();
  if (eps <= 0.0) {
    if (warn_) warn_("log-gaussian despeckler: all-zero image, returning zeros");
    return RArray::Zero(s.rows(), s.cols());
  }
  const RArray smoothed = gaussian_smooth((intensity + eps).log(), sigma_);
  return (smoothed + kEulerGamma).exp();
}

ExternalDespeckler::ExternalDespeckler(std::string command) : command_(std::move(command)) {
  require(!command_.empty(), "external despeckler needs a command");
}

std::string ExternalDespeckler::name() const { return "external:" + command_; }

namespace {

std::filesystem::path fresh_temp_dir() {
  static std::atomic<unsigned> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  const auto dir = base / ("muchapro-" + std::to_string(::getpid()) + "-" +
                           std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir;
}

struct TempDirGuard {
  std::filesystem::path dir;
  ~TempDirGuard() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
};

}  // namespace

RArray ExternalDespeckler::despeckle(const CArray& s) const {
  TempDirGuard guard{fresh_temp_dir()};
  const auto in_path = guard.dir / "input.mcslc";
  const auto out_path = guard.dir / "output.refl";

  MultiChannelImage img;
  img.channels.push_back(s);
  write_mcslc(in_path.string(), img);

  const std::string cmdline = command_ + " '" + in_path.string() + "' '" +
                              out_path.string() + "' 2>&1";
  FILE* pipe = ::popen(cmdline.c_str(), "r");
  if (pipe == nullptr)
    throw InvalidInput("external despeckler: failed to spawn '" + command_ + "'");
  std::string captured;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) captured.append(buf, got);
  if (captured.size() > 8192) captured.resize(8192);
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    throw InvalidInput("external despeckler '" + command_ + "' failed (exit " +
                       std::to_string(code) + "), output:\n" + captured);
  }

  RArray out;
  try {
    out = read_refl(out_path.string());
  } catch (const std::exception& e) {
    throw InvalidInput("external despeckler '" + command_ + "' produced malformed output: " +
                       e.what() + "\ncaptured output:\n" + captured);
  }
  if (out.rows() != s.rows() || out.cols() != s.cols()) {
    throw InvalidInput("external despeckler '" + command_ + "' returned " +
                       std::to_string(out.rows()) + "x" + std::to_string(out.cols()) +
                       ", expected " + std::to_string(s.rows()) + "x" +
                       std::to_string(s.cols()));
  }
  require(all_finite(out), "external despeckler returned non-finite values");
  return out;
}

std::unique_ptr<Despeckler> make_despeckler(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);

  if (kind == "identity") {
    require(arg.empty(), "identity despeckler takes no parameter");
    return std::make_unique<IdentityDespeckler>();
  }
  if (kind == "boxcar") {
    require(!arg.empty(), "usage: boxcar:<side>");
    const long side = std::stol(arg);
    require(side >= 1 && side % 2 == 1 && side <= 999, "boxcar side must be odd and positive");
    return std::make_unique<LinearDespeckler>(KernelWeights{boxcar_kernel(side)});
  }
  if (kind == "loggauss") {
    require(!arg.empty(), "usage: loggauss:<sigma>");
    return std::make_unique<LogGaussianDespeckler>(std::stod(arg));
  }
  if (kind == "guided") {
    const auto second = arg.find(':');
    require(second != std::string::npos, "usage: guided:<guide.refl>:<radius>");
    GuidedWeights gw;
    gw.guide = read_refl(arg.substr(0, second));
    gw.radius = static_cast<Index>(std::stol(arg.substr(second + 1)));
    return std::make_unique<LinearDespeckler>(std::move(gw));
  }
  if (kind == "external") {
    require(!arg.empty(), "usage: external:<command>");
    return std::make_unique<ExternalDespeckler>(arg);
  }
  throw InvalidInput("unknown despeckler '" + spec +
                     "' (identity | boxcar:<side> | loggauss:<sigma> | "
                     "guided:<guide.refl>:<radius> | external:<command>)");
}

}  // namespace muchapro
