#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "muchapro/io.hpp"

using namespace muchapro;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(MUCHAPRO_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, got);
  const int status = ::pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(static_cast<bool>(f));
  return std::string(std::istreambuf_iterator<char>(f), {});
}

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("muchapro-cli-" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

std::string dirs_file(const std::string& name) {
  return std::string(MUCHAPRO_DATA_DIR) + "/directions/" + name;
}

}  // namespace

TEST_CASE("simulate writes a readable image and ground truth") {
  TempDir tmp;
  const CliResult r = run_cli("simulate --phantom fringes --height 24 --width 24 --coherence "
                              "0.3:0.9 --seed 5 --out " +
                              (tmp / "img.mcslc") + " --truth-out " + (tmp / "truth.mccov"));
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("muchapro") != std::string::npos);
  CHECK(r.output.find("seed 5") != std::string::npos);
  const MultiChannelImage img = read_mcslc(tmp / "img.mcslc");
  CHECK(img.d() == 2);
  CHECK(img.height() == 24);
  const CovarianceField truth = read_mccov(tmp / "truth.mccov");
  CHECK(truth.d == 2);
}

TEST_CASE("full pipeline run is deterministic: byte-identical mccov and png") {
  TempDir tmp;
  REQUIRE(run_cli("simulate --phantom fringes --height 32 --width 32 --seed 9 --out " +
                  (tmp / "img.mcslc"))
              .exit_code == 0);
  const std::string base = "run --in " + (tmp / "img.mcslc") + " --dirs " +
                           dirs_file("d2k4_hermitian.dirs") +
                           " --despeckler boxcar:5 --enforce-pd --seed 9 ";
  const CliResult r1 = run_cli(base + "--out " + (tmp / "a.mccov") + " --composite " +
                               (tmp / "a.png") + " --view insar:0,1");
  CHECK(r1.exit_code == 0);
  const CliResult r2 = run_cli(base + "--out " + (tmp / "b.mccov") + " --composite " +
                               (tmp / "b.png") + " --view insar:0,1");
  CHECK(r2.exit_code == 0);
  CHECK(slurp(tmp / "a.mccov") == slurp(tmp / "b.mccov"));
  CHECK(slurp(tmp / "a.png") == slurp(tmp / "b.png"));
  CHECK(slurp(tmp / "a.mccov").size() > 17);
}

TEST_CASE("project/despeckle/invert stages compose to the same result as run") {
  TempDir tmp;
  REQUIRE(run_cli("simulate --phantom fringes --height 16 --width 16 --seed 3 --out " +
                  (tmp / "img.mcslc"))
              .exit_code == 0);
  REQUIRE(run_cli("project --in " + (tmp / "img.mcslc") + " --dirs " +
                  dirs_file("d2k4_hermitian.dirs") + " --out-prefix " + (tmp / "p_"))
              .exit_code == 0);
  std::string vars;
  for (int k = 0; k < 4; ++k) {
    const std::string idx = "0" + std::to_string(k);
    REQUIRE(run_cli("despeckle --in " + (tmp / ("p_k" + idx + ".mcslc")) +
                    " --despeckler boxcar:3 --out " + (tmp / ("v" + idx + ".refl")))
                .exit_code == 0);
    vars += " --var " + (tmp / ("v" + idx + ".refl"));
  }
  REQUIRE(run_cli("invert --dirs " + dirs_file("d2k4_hermitian.dirs") + vars + " --out " +
                  (tmp / "staged.mccov"))
              .exit_code == 0);
  REQUIRE(run_cli("run --in " + (tmp / "img.mcslc") + " --dirs " +
                  dirs_file("d2k4_hermitian.dirs") + " --despeckler boxcar:3 --out " +
                  (tmp / "direct.mccov"))
              .exit_code == 0);

  // the staged path stores intermediates at 32-bit precision, so compare there
  const CovarianceField staged = read_mccov(tmp / "staged.mccov");
  const CovarianceField direct = read_mccov(tmp / "direct.mccov");
  for (size_t p = 0; p < staged.planes.size(); ++p) {
    const double scale = direct.planes[p].abs().maxCoeff() + 1e-6;
    CHECK((staged.planes[p] - direct.planes[p]).abs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("invert with too few directions exits 1 citing the d^2 requirement") {
  TempDir tmp;
  DirectionFile df;
  df.dirs.p = Eigen::MatrixXcd(2, 2);
  df.dirs.p << Complex(1, 0), Complex(0, 1), Complex(0, 1), Complex(1, 0);
  df.mode = OperatorMode::hermitian_real;
  df.stored_condition = condition_number(df.dirs, df.mode);  // +inf, k < d^2
  write_direction_file(tmp / "short.dirs", df);

  write_refl(tmp / "v0.refl", RArray::Ones(4, 4));
  write_refl(tmp / "v1.refl", RArray::Ones(4, 4));
  const CliResult r = run_cli("invert --dirs " + (tmp / "short.dirs") + " --var " +
                              (tmp / "v0.refl") + " --var " + (tmp / "v1.refl") + " --out " +
                              (tmp / "out.mccov"));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("d^2") != std::string::npos);
}

TEST_CASE("validate reports re/im correlation entries") {
  TempDir tmp;
  REQUIRE(run_cli("simulate --phantom constant --d 1 --matrix 1 --height 64 --width 64 "
                  "--kernel gauss:0.5 --seed 2 --out " +
                  (tmp / "img.mcslc"))
              .exit_code == 0);
  const CliResult r = run_cli("validate --in " + (tmp / "img.mcslc"));
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("reim-corr-lag-0-0") != std::string::npos);
  CHECK(r.output.find("spectrum-symmetry") != std::string::npos);

  const CliResult to_file =
      run_cli("validate --in " + (tmp / "img.mcslc") + " --out " + (tmp / "report.txt"));
  CHECK(to_file.exit_code == 0);
  CHECK(slurp(tmp / "report.txt").find("reim-corr") != std::string::npos);
}

TEST_CASE("enforce-pd clips a raw estimate") {
  TempDir tmp;
  CovarianceField f = CovarianceField::zeros(2, 4, 4);
  f.planes[0].setConstant(-1.0);
  f.planes[1].setConstant(1.0);
  f.planes[2].setConstant(5.0);
  write_mccov(tmp / "raw.mccov", f);
  const CliResult r = run_cli("enforce-pd --in " + (tmp / "raw.mccov") + " --rthml 0.01 "
                              "--rhomax 0.9 --out " +
                              (tmp / "pd.mccov"));
  CHECK(r.exit_code == 0);
  const CovarianceField out = read_mccov(tmp / "pd.mccov");
  CHECK((out.planes[0] >= 0.0099).all());
}

TEST_CASE("user errors exit with code 1 and a message") {
  CHECK(run_cli("frobnicate").exit_code == 1);
  CHECK(run_cli("run --in /nonexistent.mcslc --dirs x --out y").exit_code == 1);
  TempDir tmp;
  REQUIRE(run_cli("simulate --phantom constant --d 2 --height 8 --width 8 --out " +
                  (tmp / "img.mcslc"))
              .exit_code == 0);
  const CliResult bad_despeckler =
      run_cli("run --in " + (tmp / "img.mcslc") + " --dirs " +
              dirs_file("d2k4_hermitian.dirs") + " --despeckler nope --out " + (tmp / "o"));
  CHECK(bad_despeckler.exit_code == 1);
  CHECK(bad_despeckler.output.find("despeckler") != std::string::npos);

  // d = 2 image into the single-channel despeckle command
  const CliResult multi = run_cli("despeckle --in " + (tmp / "img.mcslc") +
                                  " --despeckler identity --out " + (tmp / "v.refl"));
  CHECK(multi.exit_code == 1);
}

TEST_CASE("pre-decimation halves the grid before processing") {
  TempDir tmp;
  REQUIRE(run_cli("simulate --phantom fringes --height 32 --width 32 --seed 4 --out " +
                  (tmp / "img.mcslc"))
              .exit_code == 0);
  REQUIRE(run_cli("run --in " + (tmp / "img.mcslc") + " --dirs " +
                  dirs_file("d2k4_hermitian.dirs") +
                  " --despeckler boxcar:3 --pre-decimate 2 --out " + (tmp / "half.mccov"))
              .exit_code == 0);
  const CovarianceField out = read_mccov(tmp / "half.mccov");
  CHECK(out.height() == 16);
  CHECK(out.width() == 16);
}
