// muchapro command-line tool: speckle simulation, projection-direction
// optimization, the projection/despeckle/invert pipeline, covariance
// post-processing and rendering, and statistical validation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "muchapro/directions.hpp"
#include "muchapro/enforce_pd.hpp"
#include "muchapro/hermitian.hpp"
#include "muchapro/io.hpp"
#include "muchapro/speckle.hpp"
#include "muchapro/validation.hpp"
#include "muchapro/version.hpp"

namespace mp = muchapro;

namespace {

void print_provenance(const std::string& command, std::uint64_t seed,
                      const std::string& params) {
  std::cout << "muchapro " << mp::kVersion << " | " << command << " | seed " << seed;
  if (!params.empty()) std::cout << " | " << params;
  std::cout << "\n";
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

Eigen::MatrixXcd parse_matrix_params(const std::string& s, mp::Index d) {
  const std::vector<double> vals = parse_double_list(s);
  mp::require(static_cast<mp::Index>(vals.size()) == d * d,
              "--matrix needs d*d values (diagonals, Re upper, Im upper), got " +
                  std::to_string(vals.size()));
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                        static_cast<mp::Index>(vals.size()));
  return mp::devectorize_hermitian(v);
}

mp::TransferKernel parse_transfer_kernel(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "none" || kind == "delta") return mp::TransferKernel{mp::delta_kernel()};
  if (kind == "boxcar") {
    mp::require(!arg.empty(), "usage: boxcar:<side>");
    return mp::TransferKernel{mp::boxcar_kernel(std::stol(arg))};
  }
  if (kind == "gauss") {
    mp::require(!arg.empty(), "usage: gauss:<sigma>");
    return mp::TransferKernel{mp::gaussian_kernel(std::stod(arg))};
  }
  throw mp::InvalidInput("unknown kernel '" + spec + "' (none | boxcar:<side> | gauss:<sigma>)");
}

mp::CompositeSpec parse_view(const std::string& spec) {
  mp::CompositeSpec cs;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "insar") {
    cs.mode = mp::CompositeMode::insar;
    const auto comma = arg.find(',');
    mp::require(comma != std::string::npos, "usage: insar:<i>,<j>");
    cs.channel_i = std::stol(arg.substr(0, comma));
    cs.channel_j = std::stol(arg.substr(comma + 1));
    return cs;
  }
  if (kind == "amplitude") {
    mp::require(!arg.empty(), "usage: amplitude:<channel>");
    cs.mode = mp::CompositeMode::amplitude;
    cs.channel_i = std::stol(arg);
    return cs;
  }
  throw mp::InvalidInput("unknown view '" + spec + "' (insar:<i>,<j> | amplitude:<d>)");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"multi-channel SAR despeckling through single-channel projections"};
  app.require_subcommand(1);
  app.fallthrough();  // global options (--seed) may follow the subcommand

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed recorded in the provenance header")->capture_default_str();

  // ---- simulate ----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "draw a speckled image from a phantom");
  std::string sim_phantom = "constant";
  mp::Index sim_d = 2, sim_h = 256, sim_w = 256;
  std::vector<std::string> sim_matrices;
  double sim_refl = 1.0;
  std::string sim_freq = "0.03125,0";
  std::string sim_coh = "0.7";
  std::string sim_kernel = "none";
  std::string sim_out, sim_truth_out;
  sim->add_option("--phantom", sim_phantom, "constant | fringes | mosaic")->capture_default_str();
  sim->add_option("--d", sim_d, "channel count")->capture_default_str();
  sim->add_option("--height", sim_h)->capture_default_str();
  sim->add_option("--width", sim_w)->capture_default_str();
  sim->add_option("--matrix", sim_matrices,
                  "region covariance as d*d comma-separated values "
                  "(diagonals, Re upper, Im upper); repeat for mosaic regions");
  sim->add_option("--reflectivity", sim_refl, "fringes: per-channel reflectivity")
      ->capture_default_str();
  sim->add_option("--freq", sim_freq, "fringes: fx,fy in cycles/pixel")->capture_default_str();
  sim->add_option("--coherence", sim_coh, "fringes: constant or lo:hi column ramp")
      ->capture_default_str();
  sim->add_option("--kernel", sim_kernel, "transfer function: none | boxcar:<n> | gauss:<s>")
      ->capture_default_str();
  sim->add_option("--out", sim_out, "output .mcslc")->required();
  sim->add_option("--truth-out", sim_truth_out, "also write the ground-truth .mccov");

  // ---- optimize-directions ------------------------------------------------
  auto* opt = app.add_subcommand("optimize-directions",
                                 "search projection directions minimizing the condition number");
  mp::Index opt_d = 2, opt_k = 0;
  std::string opt_mode = "hermitian";
  int opt_restarts = 100, opt_jobs = 0;
  mp::Index opt_random = 0;
  std::string opt_out;
  opt->add_option("--d", opt_d, "channel count")->capture_default_str();
  opt->add_option("--k", opt_k, "direction count (default d*d)");
  opt->add_option("--mode", opt_mode, "hermitian | unconstrained")->capture_default_str();
  opt->add_option("--restarts", opt_restarts)->capture_default_str();
  opt->add_option("--jobs", opt_jobs, "parallel restarts (0 = all cores)")->capture_default_str();
  opt->add_option("--random-trials", opt_random,
                  "also sample this many random direction sets and print the study");
  opt->add_option("--out", opt_out, "output direction file");

  // ---- project -------------------------------------------------------------
  auto* proj = app.add_subcommand("project", "project a multi-channel image onto directions");
  std::string proj_in, proj_dirs, proj_prefix;
  mp::Index proj_decimate = 1;
  proj->add_option("--in", proj_in, "input .mcslc")->required();
  proj->add_option("--dirs", proj_dirs, "direction file")->required();
  proj->add_option("--out-prefix", proj_prefix, "writes <prefix>k<NN>.mcslc")->required();
  proj->add_option("--pre-decimate", proj_decimate, "keep every n-th pixel first")
      ->capture_default_str();

  // ---- despeckle ------------------------------------------------------------
  auto* desp = app.add_subcommand("despeckle", "despeckle one single-channel image");
  std::string desp_in, desp_spec = "identity", desp_out;
  desp->add_option("--in", desp_in, "input .mcslc with d = 1")->required();
  desp->add_option("--despeckler", desp_spec,
                   "identity | boxcar:<side> | loggauss:<sigma> | guided:<refl>:<radius> | "
                   "external:<command>")
      ->capture_default_str();
  desp->add_option("--out", desp_out, "output reflectivity raster (.refl / d = 1 .mccov)")
      ->required();

  // ---- invert ---------------------------------------------------------------
  auto* inv = app.add_subcommand("invert", "recover covariances from despeckled variances");
  std::string inv_dirs, inv_mode = "hermitian", inv_out, inv_residuals;
  std::vector<std::string> inv_vars;
  inv->add_option("--dirs", inv_dirs, "direction file")->required();
  inv->add_option("--mode", inv_mode, "hermitian | unconstrained")->capture_default_str();
  inv->add_option("--var", inv_vars, "reflectivity rasters, one per direction, in order")
      ->required();
  inv->add_option("--out", inv_out, "output .mccov")->required();
  inv->add_option("--residual-out", inv_residuals, "per-pixel residual norms (d = 1 .mccov)");

  // ---- run -------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "full pipeline: project, despeckle, invert");
  std::string run_in, run_dirs, run_spec = "boxcar:5", run_mode = "hermitian", run_out;
  std::string run_composite, run_view = "insar:0,1";
  bool run_enforce = false, run_subst = false;
  double run_rthml = 0.0, run_rhomax = 0.99;
  int run_jobs = 0;
  mp::Index run_decimate = 1;
  run->add_option("--in", run_in, "input .mcslc")->required();
  run->add_option("--dirs", run_dirs, "direction file")->required();
  run->add_option("--despeckler", run_spec)->capture_default_str();
  run->add_option("--mode", run_mode, "hermitian | unconstrained")->capture_default_str();
  run->add_option("--out", run_out, "output .mccov")->required();
  run->add_flag("--enforce-pd", run_enforce, "apply positive-definiteness enforcement");
  run->add_option("--rthml", run_rthml,
                  "reflectivity floor (0 = 1e-3 of the scene median)")
      ->capture_default_str();
  run->add_option("--rhomax", run_rhomax, "coherence ceiling")->capture_default_str();
  run->add_flag("--subst-reflectivities", run_subst,
                "replace diagonals with per-channel despeckled reflectivities");
  run->add_option("--composite", run_composite, "also render a .png composite");
  run->add_option("--view", run_view, "insar:<i>,<j> | amplitude:<d>")->capture_default_str();
  run->add_option("--jobs", run_jobs)->capture_default_str();
  run->add_option("--pre-decimate", run_decimate, "keep every n-th pixel first")
      ->capture_default_str();

  // ---- enforce-pd ---------------------------------------------------------
  auto* epd = app.add_subcommand("enforce-pd", "clip reflectivities and coherences");
  std::string epd_in, epd_out;
  double epd_rthml = 0.0, epd_rhomax = 0.99;
  epd->add_option("--in", epd_in, "input .mccov")->required();
  epd->add_option("--out", epd_out, "output .mccov")->required();
  epd->add_option("--rthml", epd_rthml, "reflectivity floor (0 = 1e-3 of the scene median)")
      ->capture_default_str();
  epd->add_option("--rhomax", epd_rhomax, "coherence ceiling")->capture_default_str();

  // ---- composite -------------------------------------------------------------
  auto* comp = app.add_subcommand("composite", "render a covariance field to PNG");
  std::string comp_in, comp_out, comp_view = "insar:0,1";
  double comp_clip = 0.99, comp_gamma = 0.7;
  comp->add_option("--in", comp_in, "input .mccov")->required();
  comp->add_option("--out", comp_out, "output .png")->required();
  comp->add_option("--view", comp_view, "insar:<i>,<j> | amplitude:<d>")->capture_default_str();
  comp->add_option("--clip-quantile", comp_clip)->capture_default_str();
  comp->add_option("--gamma", comp_gamma)->capture_default_str();

  // ---- validate ---------------------------------------------------------------
  auto* val = app.add_subcommand("validate", "statistical checks on an image");
  std::string val_in, val_dirs, val_out, val_prop1;
  bool val_adaptive = false;
  val->add_option("--in", val_in, "input .mcslc")->required();
  val->add_option("--dirs", val_dirs, "check projections instead of raw channels");
  val->add_option("--prop1", val_prop1,
                  "linear-equivalence check with this kernel (needs --dirs), "
                  "for example boxcar:5");
  val->add_flag("--adaptive-control", val_adaptive,
                "also run the intensity-adaptive negative control (needs --dirs)");
  val->add_option("--out", val_out, "report path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad arguments are a user error
  }

  if (sim->parsed()) {
    mp::PhantomSpec spec;
    spec.d = sim_d;
    spec.height = sim_h;
    spec.width = sim_w;
    if (sim_phantom == "constant") {
      spec.kind = mp::PhantomKind::constant;
      mp::require(sim_matrices.size() <= 1, "constant phantom takes one --matrix");
      spec.matrices.push_back(sim_matrices.empty()
                                  ? Eigen::MatrixXcd::Identity(sim_d, sim_d).eval()
                                  : parse_matrix_params(sim_matrices[0], sim_d));
    } else if (sim_phantom == "fringes") {
      spec.kind = mp::PhantomKind::fringes;
      spec.d = 2;
      spec.reflectivity = sim_refl;
      const auto freq = parse_double_list(sim_freq);
      mp::require(freq.size() == 2, "--freq needs fx,fy");
      spec.freq_x = freq[0];
      spec.freq_y = freq[1];
      const auto colon = sim_coh.find(':');
      spec.coherence_lo = std::stod(sim_coh.substr(0, colon));
      spec.coherence_hi =
          colon == std::string::npos ? spec.coherence_lo : std::stod(sim_coh.substr(colon + 1));
    } else if (sim_phantom == "mosaic") {
      spec.kind = mp::PhantomKind::mosaic;
      mp::require(!sim_matrices.empty(), "mosaic phantom needs --matrix entries");
      for (const auto& m : sim_matrices) spec.matrices.push_back(parse_matrix_params(m, sim_d));
    } else {
      throw mp::InvalidInput("unknown phantom '" + sim_phantom + "'");
    }
    const mp::CovarianceField truth = mp::make_phantom(spec);
    mp::MultiChannelImage img = mp::sample_goodman(truth, seed);
    const mp::TransferKernel kernel = parse_transfer_kernel(sim_kernel);
    if (kernel.kernel.rows() > 1 || kernel.kernel.cols() > 1) img = mp::apply_transfer(img, kernel);
    mp::write_mcslc(sim_out, img);
    if (!sim_truth_out.empty()) mp::write_mccov(sim_truth_out, truth);
    print_provenance("simulate", seed,
                     "phantom=" + sim_phantom + " d=" + std::to_string(spec.d) + " h=" +
                         std::to_string(sim_h) + " w=" + std::to_string(sim_w) + " kernel=" +
                         sim_kernel + " out=" + sim_out);
    return 0;
  }

  if (opt->parsed()) {
    const mp::OperatorMode mode = mp::operator_mode_from_string(opt_mode);
    if (opt_k == 0) opt_k = opt_d * opt_d;
    mp::SmoothedConditionParams params;
    params.restarts = opt_restarts;
    params.seed = seed;
    params.jobs = opt_jobs;
    print_provenance("optimize-directions", seed,
                     "d=" + std::to_string(opt_d) + " k=" + std::to_string(opt_k) + " mode=" +
                         opt_mode + " restarts=" + std::to_string(opt_restarts));
    if (!opt_out.empty() || opt_random == 0) {
      const mp::OptimizedDirections best = mp::optimize_directions(opt_d, opt_k, mode, params);
      std::cout << "optimized condition number " << std::setprecision(12) << best.condition
                << " (restart " << best.best_restart << ")\n";
      if (!best.diagnostic.empty()) std::cout << "diagnostic: " << best.diagnostic << "\n";
      if (!opt_out.empty()) {
        mp::DirectionFile df;
        df.dirs = best.dirs;
        df.mode = mode;
        df.seed = seed;
        df.provenance = "optimize-directions restarts=" + std::to_string(opt_restarts) +
                        " muchapro-" + mp::kVersion;
        df.stored_condition = best.condition;
        mp::write_direction_file(opt_out, df);
        std::cout << "wrote " << opt_out << "\n";
      }
    }
    if (opt_random > 0) {
      const mp::RandomDirectionStudy study =
          mp::random_direction_study(opt_d, opt_k, mode, opt_random, seed, opt_jobs);
      std::cout << "random study: trials=" << opt_random << " min=" << study.min
                << " median=" << study.median << "\n";
      // decade histogram of the sampled condition numbers
      std::vector<mp::Index> bins(12, 0);
      mp::Index singular = 0;
      for (const double c : study.conditions) {
        if (!std::isfinite(c)) {
          ++singular;
          continue;
        }
        const auto b = static_cast<size_t>(std::clamp(std::floor(std::log10(c)), 0.0, 11.0));
        ++bins[b];
      }
      for (size_t b = 0; b < bins.size(); ++b) {
        if (bins[b] == 0) continue;
        std::cout << "  cond in [1e" << b << ", 1e" << b + 1 << "): " << bins[b] << "\n";
      }
      if (singular > 0) std::cout << "  singular: " << singular << "\n";
    }
    return 0;
  }

  if (proj->parsed()) {
    mp::MultiChannelImage img = mp::read_mcslc(proj_in);
    if (proj_decimate > 1) img = mp::decimate(img, proj_decimate);
    const mp::DirectionFile df = mp::read_direction_file(proj_dirs);
    const std::vector<mp::CArray> projections = mp::project(img, df.dirs);
    for (size_t k = 0; k < projections.size(); ++k) {
      mp::MultiChannelImage single;
      single.channels.push_back(projections[k]);
      std::ostringstream path;
      path << proj_prefix << "k" << std::setw(2) << std::setfill('0') << k << ".mcslc";
      mp::write_mcslc(path.str(), single);
    }
    print_provenance("project", seed,
                     "in=" + proj_in + " dirs=" + proj_dirs + " k=" +
                         std::to_string(projections.size()));
    return 0;
  }

  if (desp->parsed()) {
    const mp::MultiChannelImage img = mp::read_mcslc(desp_in);
    mp::require(img.d() == 1, "despeckle expects a single-channel image (d = 1)");
    const auto despeckler = mp::make_despeckler(desp_spec);
    mp::RArray v = despeckler->despeckle(img.channels[0]);
    const mp::Index clipped = (v < 0.0).count();
    if (clipped > 0) v = v.cwiseMax(0.0);
    mp::write_refl(desp_out, v);
    print_provenance("despeckle", seed,
                     "in=" + desp_in + " despeckler=" + desp_spec + " clipped=" +
                         std::to_string(clipped));
    return 0;
  }

  if (inv->parsed()) {
    const mp::DirectionFile df = mp::read_direction_file(inv_dirs);
    const mp::OperatorMode mode = mp::operator_mode_from_string(inv_mode);
    const mp::ProjectionOperator op = mp::ProjectionOperator::build(df.dirs, mode);
    mp::require(static_cast<mp::Index>(inv_vars.size()) == df.dirs.k(),
                "invert: need one --var per direction (" + std::to_string(df.dirs.k()) + ")");
    std::vector<mp::RArray> variances;
    variances.reserve(inv_vars.size());
    for (const auto& path : inv_vars) variances.push_back(mp::read_refl(path));
    const mp::InversionResult res = op.invert(variances, !inv_residuals.empty());
    mp::write_mccov(inv_out, res.field);
    if (!inv_residuals.empty()) mp::write_refl(inv_residuals, *res.residual_norm);
    print_provenance("invert", seed,
                     "dirs=" + inv_dirs + " mode=" + inv_mode + " gram-cond=" +
                         std::to_string(op.gram_condition()) + " max-asymmetry=" +
                         std::to_string(res.max_asymmetry));
    return 0;
  }

  if (run->parsed()) {
    mp::MultiChannelImage img = mp::read_mcslc(run_in);
    if (run_decimate > 1) img = mp::decimate(img, run_decimate);
    const mp::DirectionFile df = mp::read_direction_file(run_dirs);
    const auto despeckler = mp::make_despeckler(run_spec);
    mp::PipelineOptions options;
    options.mode = mp::operator_mode_from_string(run_mode);
    options.substitute_reflectivities = run_subst;
    options.jobs = run_jobs;
    mp::PipelineResult res =
        mp::run_muchapro(img, df.dirs, *despeckler, options);
    if (run_enforce) {
      mp::PdParams pd;
      pd.r_thml = run_rthml > 0.0 ? run_rthml : mp::default_r_thml(res.field);
      pd.rho_max = run_rhomax;
      res.field = mp::enforce_pd_field(res.field, pd, run_jobs);
    }
    mp::write_mccov(run_out, res.field);
    if (!run_composite.empty())
      mp::write_png(run_composite, mp::render_composite(res.field, parse_view(run_view)));
    print_provenance("run", seed,
                     "in=" + run_in + " dirs=" + run_dirs + " despeckler=" + run_spec +
                         " mode=" + run_mode + " clipped=" +
                         std::to_string(res.clipped_negative) + " out=" + run_out);
    return 0;
  }

  if (epd->parsed()) {
    const mp::CovarianceField field = mp::read_mccov(epd_in);
    mp::PdParams pd;
    pd.r_thml = epd_rthml > 0.0 ? epd_rthml : mp::default_r_thml(field);
    pd.rho_max = epd_rhomax;
    mp::write_mccov(epd_out, mp::enforce_pd_field(field, pd));
    print_provenance("enforce-pd", seed,
                     "in=" + epd_in + " rthml=" + std::to_string(pd.r_thml) + " rhomax=" +
                         std::to_string(pd.rho_max));
    return 0;
  }

  if (comp->parsed()) {
    const mp::CovarianceField field = mp::read_mccov(comp_in);
    mp::CompositeSpec cs = parse_view(comp_view);
    cs.clip_quantile = comp_clip;
    cs.gamma = comp_gamma;
    mp::write_png(comp_out, mp::render_composite(field, cs));
    print_provenance("composite", seed, "in=" + comp_in + " view=" + comp_view);
    return 0;
  }

  if (val->parsed()) {
    const mp::MultiChannelImage img = mp::read_mcslc(val_in);
    mp::ValidationReport report;
    report.provenance = std::string("muchapro ") + mp::kVersion + " validate seed " +
                        std::to_string(seed) + " in " + val_in;

    std::vector<std::pair<std::string, mp::CArray>> planes;
    std::optional<mp::DirectionFile> df;
    if (!val_dirs.empty()) {
      df = mp::read_direction_file(val_dirs);
      const auto projections = mp::project(img, df->dirs);
      for (size_t k = 0; k < projections.size(); ++k)
        planes.emplace_back("projection-" + std::to_string(k), projections[k]);
    } else {
      for (mp::Index d = 0; d < img.d(); ++d)
        planes.emplace_back("channel-" + std::to_string(d),
                            img.channels[static_cast<size_t>(d)]);
    }
    for (const auto& [label, plane] : planes) {
      for (auto e : mp::check_reim_independence(plane)) {
        e.name = label + "/" + e.name;
        report.entries.push_back(std::move(e));
      }
      auto e = mp::check_spectrum_symmetry(plane);
      e.name = label + "/" + e.name;
      report.entries.push_back(std::move(e));
    }
    if (!val_prop1.empty() || val_adaptive) {
      mp::require(df.has_value(), "--prop1/--adaptive-control need --dirs");
      if (!val_prop1.empty()) {
        const mp::TransferKernel k = parse_transfer_kernel(val_prop1);
        report.entries.push_back(mp::check_prop1_equivalence(
            img, df->dirs, mp::LinearFilterWeights{mp::KernelWeights{k.kernel}}));
      }
      if (val_adaptive)
        report.entries.push_back(
            mp::check_prop1_equivalence(img, df->dirs, mp::AdaptiveWeights{}));
    }

    const std::string text = mp::to_text(report);
    if (val_out.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(val_out);
      mp::require(static_cast<bool>(f), "cannot open '" + val_out + "' for writing");
      f << text;
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const mp::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const mp::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
