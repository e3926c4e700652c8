#include "muchapro/validation.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <tuple>

#include "muchapro/hermitian.hpp"

namespace muchapro {

std::string to_text(const ValidationReport& report) {
  std::ostringstream out;
  out << "muchapro validation report\n";
  if (!report.provenance.empty()) out << report.provenance << "\n";
  out << "\n";
  for (const auto& e : report.entries) {
    out << (e.degenerate ? "UNDEF" : (e.pass ? "PASS " : "FAIL ")) << "  " << e.name << "\n";
    out << "       statistic " << std::setprecision(6) << e.statistic << "  threshold "
        << e.threshold << "  n " << e.sample_size << "\n";
    out << "       formula " << e.formula << "\n";
    if (!e.note.empty()) out << "       note " << e.note << "\n";
  }
  out << (report.all_passed() ? "ALL PASSED\n" : "FAILURES PRESENT\n");
  return out.str();
}

RArray adaptive_filter(const RArray& plane, const RArray& guide, const AdaptiveWeights& w) {
  require(plane.rows() == guide.rows() && plane.cols() == guide.cols(),
          "adaptive_filter: guide dimensions mismatch");
  const Index h = plane.rows(), wd = plane.cols(), r = w.radius;
  const double scale = std::max(guide.mean(), 1e-300) * w.bandwidth;
  RArray out(h, wd);
  for (Index row = 0; row < h; ++row) {
    for (Index col = 0; col < wd; ++col) {
      const double center = guide(row, col);
      double acc = 0.0, norm = 0.0;
      const Index r0 = std::max<Index>(0, row - r), r1 = std::min(h - 1, row + r);
      const Index c0 = std::max<Index>(0, col - r), c1 = std::min(wd - 1, col + r);
      for (Index rr = r0; rr <= r1; ++rr)
        for (Index cc = c0; cc <= c1; ++cc) {
          const double dg = (guide(rr, cc) - center) / scale;
          const double weight = std::exp(-0.5 * dg * dg);
          acc += weight * plane(rr, cc);
          norm += weight;
        }
      out(row, col) = acc / norm;
    }
  }
  return out;
}

namespace {

// covariance outer products z z^H as d*d real planes in parameter order
std::vector<RArray> outer_product_planes(const MultiChannelImage& img) {
  const Index d = img.d(), t = upper_pair_count(d);
  std::vector<RArray> planes(static_cast<size_t>(d * d));
  for (Index i = 0; i < d; ++i) planes[static_cast<size_t>(i)] = img.channels[static_cast<size_t>(i)].abs2();
  for (Index pair = 0; pair < t; ++pair) {
    const auto [i, j] = upper_pair(d, pair);
    const CArray prod = img.channels[static_cast<size_t>(i)] *
                        img.channels[static_cast<size_t>(j)].conjugate();
    planes[static_cast<size_t>(d + pair)] = prod.real();
    planes[static_cast<size_t>(d + t + pair)] = prod.imag();
  }
  return planes;
}

RArray total_intensity(const MultiChannelImage& img) {
  RArray span = img.channels[0].abs2();
  for (size_t d = 1; d < img.channels.size(); ++d) span += img.channels[d].abs2();
  return span;
}

}  // namespace

ValidationEntry check_prop1_equivalence(const MultiChannelImage& img,
                                        const DirectionSet& dirs,
                                        const EquivalenceWeights& weights) {
  img.validate();
  const Index d = img.d(), t = upper_pair_count(d);
  const Index h = img.height(), w = img.width();

  const bool adaptive = std::holds_alternative<AdaptiveWeights>(weights);
  auto filter_plane = [&](const RArray& plane, const RArray& guide) {
    if (adaptive) return adaptive_filter(plane, guide, std::get<AdaptiveWeights>(weights));
    return apply_linear_weights(plane, std::get<LinearFilterWeights>(weights));
  };

  // route 1: filter the multi-channel outer products directly
  std::vector<RArray> direct = outer_product_planes(img);
  const RArray span = total_intensity(img);
  for (auto& plane : direct) plane = filter_plane(plane, span);

  // route 2: filter the projection intensities, then invert
  const ProjectionOperator op = ProjectionOperator::build(dirs, OperatorMode::hermitian_real);
  const std::vector<CArray> projections = project(img, dirs);
  std::vector<RArray> variances;
  variances.reserve(projections.size());
  for (const auto& s : projections) {
    const RArray intensity = s.abs2();
    variances.push_back(filter_plane(intensity, intensity));
  }
  const CovarianceField mucha = op.invert(variances).field;

  double max_rel = 0.0;
  for (Index l = 0; l < h * w; ++l) {
    double num = 0.0, den = 0.0;
    for (Index p = 0; p < d * d; ++p) {
      const double weight = p < d ? 1.0 : 2.0;  // off-diagonal parts count twice
      const double a = direct[static_cast<size_t>(p)].data()[l];
      const double b = mucha.planes[static_cast<size_t>(p)].data()[l];
      num += weight * (a - b) * (a - b);
      den += weight * a * a;
    }
    max_rel = std::max(max_rel, std::sqrt(num / std::max(den, 1e-300)));
  }

  ValidationEntry e;
  e.name = adaptive ? "prop1-equivalence-adaptive-control" : "prop1-equivalence";
  e.statistic = max_rel;
  e.threshold = 1e-10;
  e.pass = adaptive ? max_rel > 1e-3 : max_rel < e.threshold;
  e.sample_size = h * w;
  e.formula = "max_l ||C_direct - C_projected||_F / ||C_direct||_F";
  if (adaptive)
    e.note = "negative control: data-dependent weights must break the equivalence (> 1e-3)";
  (void)t;
  return e;
}

namespace {

struct CorrStat {
  double r = 0.0;
  bool degenerate = false;
  Index pairs = 0;
};

CorrStat lagged_correlation(const RArray& a, const RArray& b, Index dr, Index dc) {
  const Index h = a.rows(), w = a.cols();
  const Index rows = h - dr, cols = w - dc;
  CorrStat st;
  st.pairs = rows * cols;
  const auto x = a.block(0, 0, rows, cols);
  const auto y = b.block(dr, dc, rows, cols);
  const double mx = x.mean(), my = y.mean();
  const double sxx = (x - mx).square().sum();
  const double syy = (y - my).square().sum();
  const double sxy = ((x - mx) * (y - my)).sum();
  if (sxx <= 0.0 || syy <= 0.0) {
    st.degenerate = true;
    st.r = std::numeric_limits<double>::quiet_NaN();
    return st;
  }
  st.r = sxy / std::sqrt(sxx * syy);
  return st;
}

}  // namespace

std::vector<ValidationEntry> check_reim_independence(const CArray& s) {
  const RArray re = s.real();
  const RArray im = s.imag();
  const Index n = s.size();
  const double threshold = 4.0 / std::sqrt(static_cast<double>(n));

  const std::array<std::tuple<const char*, Index, Index>, 3> lags = {
      std::tuple{"reim-corr-lag-0-0", Index{0}, Index{0}},
      std::tuple{"reim-corr-lag-0-1", Index{0}, Index{1}},
      std::tuple{"reim-corr-lag-1-0", Index{1}, Index{0}},
  };

  std::vector<ValidationEntry> out;
  for (const auto& [name, dr, dc] : lags) {
    const CorrStat st = lagged_correlation(re, im, dr, dc);
    ValidationEntry e;
    e.name = name;
    e.statistic = st.r;
    e.threshold = threshold;
    e.degenerate = st.degenerate;
    e.pass = !st.degenerate && std::abs(st.r) < threshold;
    e.sample_size = n;
    e.formula = "pearson(Re s, Im s shifted by (" + std::to_string(dr) + "," +
                std::to_string(dc) + ")), pass |r| < 4/sqrt(N)";
    if (st.degenerate) e.note = "correlation undefined: a component has zero variance";
    out.push_back(std::move(e));
  }
  return out;
}

ValidationEntry check_spectrum_symmetry(const CArray& s, Index block) {
  const Index h = s.rows(), w = s.cols();
  const Index b = std::min({block, h, w});
  const Index br = h / b, bc = w / b;

  // block-averaged periodogram (the raw single periodogram fluctuates too
  // much for a pointwise symmetry comparison)
  Eigen::MatrixXcd twiddle(b, b);
  for (Index j = 0; j < b; ++j)
    for (Index k = 0; k < b; ++k)
      twiddle(j, k) = std::polar(1.0, -2.0 * M_PI * static_cast<double>(j * k) /
                                          static_cast<double>(b));
  Eigen::MatrixXd power = Eigen::MatrixXd::Zero(b, b);
  Eigen::MatrixXcd tile(b, b), spec(b, b);
  for (Index i = 0; i < br; ++i)
    for (Index j = 0; j < bc; ++j) {
      for (Index r = 0; r < b; ++r)
        for (Index c = 0; c < b; ++c) tile(r, c) = s(i * b + r, j * b + c);
      spec = twiddle * tile * twiddle.transpose();
      power += spec.cwiseAbs2();
    }

  double num = 0.0, den = 0.0;
  for (Index u = 0; u < b; ++u)
    for (Index v = 0; v < b; ++v) {
      const double p = power(u, v);
      const double q = power((b - u) % b, (b - v) % b);
      num += std::abs(p - q);
      den += p;
    }

  ValidationEntry e;
  e.name = "spectrum-symmetry";
  e.statistic = den > 0.0 ? num / den : 0.0;
  e.threshold = 0.05;
  e.pass = e.statistic < e.threshold;
  e.sample_size = br * bc;
  e.formula = "sum |S(w) - S(-w)| / sum S(w), block-averaged periodogram (advisory)";
  e.note = "advisory threshold, calibrated on white speckle";
  return e;
}

PhaseCoherenceError phase_coherence_error(const CovarianceField& estimated,
                                          const CovarianceField& truth, Index i, Index j) {
  require(estimated.d == truth.d, "phase_coherence_error: channel count mismatch");
  require(estimated.height() == truth.height() && estimated.width() == truth.width(),
          "phase_coherence_error: dimension mismatch");
  require(i != j && i >= 0 && j >= 0 && i < truth.d && j < truth.d,
          "phase_coherence_error: bad channel pair");

  const Index lo = std::min(i, j), hi = std::max(i, j);
  const Index t = upper_pair_index(truth.d, lo, hi);
  const double sign = i < j ? 1.0 : -1.0;

  double sq_sum = 0.0, coh_sum = 0.0;
  const Index n = truth.pixels();
  for (Index l = 0; l < n; ++l) {
    const Complex est(estimated.re_plane(t).data()[l],
                      sign * estimated.im_plane(t).data()[l]);
    const Complex tru(truth.re_plane(t).data()[l], sign * truth.im_plane(t).data()[l]);
    const double dphi = std::arg(est * std::conj(tru));
    sq_sum += dphi * dphi;

    auto coherence = [&](const CovarianceField& f, const Complex& c) {
      const double di = f.diag_plane(i).data()[l];
      const double dj = f.diag_plane(j).data()[l];
      const double den = std::sqrt(std::max(di, 0.0) * std::max(dj, 0.0));
      return den > 0.0 ? std::abs(c) / den : 0.0;
    };
    coh_sum += std::abs(coherence(estimated, est) - coherence(truth, tru));
  }

  PhaseCoherenceError out;
  out.phase_rmse = std::sqrt(sq_sum / static_cast<double>(n));
  out.coherence_mae = coh_sum / static_cast<double>(n);
  return out;
}

}  // namespace muchapro
