#pragma once

#include <string>
#include <variant>
#include <vector>

#include "muchapro/despeckle.hpp"
#include "muchapro/projection.hpp"
#include "muchapro/types.hpp"

namespace muchapro {

struct ValidationEntry {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool degenerate = false;  // statistic undefined (for example zero variance)
  Index sample_size = 0;
  std::string formula;
  std::string note;
};

struct ValidationReport {
  std::string provenance;
  std::vector<ValidationEntry> entries;

  bool all_passed() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
};

std::string to_text(const ValidationReport& report);

/// Intensity-adaptive window weights computed from the filtered data itself;
/// the negative control for the linear-equivalence check (such weights are
/// outside the linear class, so the two estimation routes must disagree).
struct AdaptiveWeights {
  Index radius = 2;
  double bandwidth = 0.5;  // similarity bandwidth, relative to the mean guide level
};

using EquivalenceWeights = std::variant<LinearFilterWeights, AdaptiveWeights>;

/// Weighted window average with weights exp(-(g_l - g_c)^2 / (2 b^2 mean(g)^2))
/// driven by the guide plane, normalized per window.
RArray adaptive_filter(const RArray& plane, const RArray& guide, const AdaptiveWeights& w);

/// Checks that filtering the covariance outer products directly and running
/// the projection pipeline with the same single-channel filter agree: the
/// statistic is the largest per-pixel relative Frobenius discrepancy. Passes
/// below 1e-10 for data-independent weights; intensity-adaptive weights are
/// expected to fail by a wide margin.
ValidationEntry check_prop1_equivalence(const MultiChannelImage& img,
                                        const DirectionSet& dirs,
                                        const EquivalenceWeights& weights);

/// Pearson correlation between Re(s) and Im(s) at spatial lags (0,0), (0,1)
/// and (1,0); each passes when |r| < 4/sqrt(N) with N the pixel count.
std::vector<ValidationEntry> check_reim_independence(const CArray& s);

/// Relative L1 asymmetry between the block-averaged power spectrum and its
/// point reflection about DC. Advisory threshold 0.05: small for real-valued
/// system responses, large under complex modulation. The statistic
/// concentrates near 1.13/sqrt(#blocks) for symmetric spectra, so the
/// default block size is calibrated for images of 256x256 and up.
ValidationEntry check_spectrum_symmetry(const CArray& s, Index block = 8);

struct PhaseCoherenceError {
  double phase_rmse = 0.0;    // wrap-aware, radians
  double coherence_mae = 0.0;
};

/// Circle-aware phase RMSE and coherence MAE between two covariance fields
/// for channel pair (i, j). Apply positive-definiteness enforcement first if
/// the estimated field may carry nonpositive diagonals.
PhaseCoherenceError phase_coherence_error(const CovarianceField& estimated,
                                          const CovarianceField& truth, Index i, Index j);

}  // namespace muchapro
