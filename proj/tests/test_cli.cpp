#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eitmem/cli.hpp"
#include "eitmem/csv_format.hpp"
#include "eitmem/errors.hpp"
#include "eitmem/fits.hpp"
#include "eitmem/manifest.hpp"
#include "oracles.hpp"

using namespace eitmem;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs `args` at full parallelism, replays the manifest single-threaded and
// returns the number of artifacts compared.
std::size_t check_replay(std::vector<std::string> args, const fs::path& dir) {
  unsetenv("EITMEM_THREADS");
  args.insert(args.end(), {"--out", (dir / "first").string()});
  const Run first = cli(args);
  REQUIRE_MESSAGE(first.code == 0, first.err);
  setenv("EITMEM_THREADS", "1", 1);
  const Run again = cli({"run", "--from-manifest", (dir / "first" / "manifest.json").string(),
                         "--out", (dir / "again").string()});
  unsetenv("EITMEM_THREADS");
  REQUIRE_MESSAGE(again.code == 0, again.err);
  const auto m1 = nlohmann::json::parse(slurp(dir / "first" / "manifest.json"));
  const auto m2 = nlohmann::json::parse(slurp(dir / "again" / "manifest.json"));
  CHECK(m1.at("request") == m2.at("request"));
  CHECK(m1.at("outputs") == m2.at("outputs"));
  CHECK(m1.at("fingerprint") == m2.at("fingerprint"));
  std::size_t n = 0;
  for (const auto& o : m1.at("outputs")) {
    const std::string f = o.at("file");
    const std::string a = slurp(dir / "first" / f);
    CHECK_MESSAGE(a == slurp(dir / "again" / f), f);
    CHECK(sha256_hex(a) == o.at("sha256").get<std::string>());
    ++n;
  }
  return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help matches golden files and lists every flag") {
  for (const auto& sub : subcommand_names()) {
    const Run r = cli({sub, "--help"});
    CHECK(r.code == 0);
    const fs::path golden = fs::path(EITMEM_GOLDEN_DIR) / (sub + ".txt");
    REQUIRE_MESSAGE(fs::exists(golden), golden.string());
    CHECK_MESSAGE(r.out == slurp(golden), sub);
    for (const auto& flag : accepted_flags(sub)) CHECK_MESSAGE(r.out.find(flag) != std::string::npos, sub << " " << flag);
  }
  const Run top = cli({"--help"});
  CHECK(top.code == 0);
  CHECK(top.out == slurp(fs::path(EITMEM_GOLDEN_DIR) / "eitmem.txt"));
  for (const auto& sub : subcommand_names()) CHECK(top.out.find(sub) != std::string::npos);
}

TEST_CASE("stable flag surface") {
  for (const char* sub : {"spectrum", "series"})
    for (const char* flag : {"--model", "--cell", "--coupling-intensity", "--delta-c", "--probe-grid", "--out"}) {
      const auto flags = accepted_flags(sub);
      CHECK(std::find(flags.begin(), flags.end(), flag) != flags.end());
    }
  CHECK_THROWS_AS(accepted_flags("plot"), InputError);
  const Run v = cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(std::string(kToolVersion)) != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = oracle::scratch_dir("cli-exit");
  const std::string out = (dir / "o").string();
  Run r = cli({"spectrum", "--bogus", "1"});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("--coupling-intensity") != std::string::npos);
  CHECK(cli({"plot"}).code == kExitInput);
  CHECK(cli({}).code == kExitInput);
  CHECK(cli({"spectrum", "--cell", "argon", "--out", out}).code == kExitInput);
  CHECK(cli({"spectrum", "--model", "two-level", "--out", out}).code == kExitInput);
  CHECK(cli({"spectrum", "--probe-grid", "5:1:10", "--out", out}).code == kExitInput);
  CHECK(cli({"spectrum", "--coupling-intensity", "-3", "--out", out}).code == kExitInput);
  CHECK(cli({"broadening", "--angle", "0.5", "--out", out}).code == kExitInput);
  CHECK(cli({"fit", "--shape", "linear", "--data", (dir / "none.csv").string(), "--out", out}).code ==
        kExitInput);
  CHECK(cli({"run", "--from-manifest", (dir / "none.json").string(), "--out", out}).code == kExitInput);

  std::ofstream(dir / "flat.csv") << "x,y\n1,0\n1,1\n1,2\n1,3\n1,4\n";
  r = cli({"fit", "--shape", "linear", "--data", (dir / "flat.csv").string(), "--out", out});
  CHECK(r.code == kExitSolver);
  CHECK(r.err.find("shape linear") != std::string::npos);

  r = cli({"spectrum", "--coupling-intensity", "0", "--probe-intensity", "0", "--probe-grid",
           "-1e4:1e4:21", "--out", out});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("coupling intensity 0") != std::string::npos);
}

TEST_CASE("spectrum artifacts") {
  const auto dir = oracle::scratch_dir("cli-spectrum");
  const Run r = cli({"spectrum", "--model", "four-level", "--cell", "ne-5torr", "--delta-c", "0",
                     "--out", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto side = nlohmann::json::parse(slurp(dir / "spectrum.json"));
  CHECK(side.at("manifest") == "manifest.json");
  CHECK(side.at("dip").at("center_hz").get<double>() > 0.0);
  CHECK(slurp(dir / "spectrum.csv").rfind("delta_p_hz,alpha_p\n", 0) == 0);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("tool") == "eitmem");
  CHECK(m.at("subcommand") == "spectrum");
  CHECK(m.at("fingerprint") == side.at("fingerprint"));
  CHECK(m.contains("timestamp"));
  CHECK(m.contains("version"));
}

TEST_CASE("broadening table") {
  const auto dir = oracle::scratch_dir("cli-broadening");
  const Run r = cli({"broadening", "--cell", "ne-5torr", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("transit_diffusion") != std::string::npos);
  CHECK(r.out.find("352.2") != std::string::npos);
  CHECK(slurp(dir / "broadening.csv").rfind("mechanism,value_hz\n", 0) == 0);
}

TEST_CASE("manifest replay is byte-identical") {
  const auto dir = oracle::scratch_dir("cli-replay");
  CHECK(check_replay({"spectrum", "--cell", "alkene", "--probe-grid", "-60e3:60e3:301"}, dir / "spectrum") == 3);
  CHECK(check_replay({"series", "--delta-c", "-400e6:400e6:3", "--probe-grid", "-100e3:100e3:201"},
                     dir / "series") == 3);
  CHECK(check_replay({"linewidth-scan", "--cell", "paraffin", "--intensities", "2:20:4", "--points", "401"},
                     dir / "linewidth") == 2);
  CHECK(check_replay({"broadening", "--cell", "paraffin", "--angle", "0.01"}, dir / "broadening") == 2);
  CHECK(check_replay({"storage", "--cell", "paraffin", "--storage-times", "0:20e-6:6", "--write-duration",
                      "20e-6", "--retrieval-window", "5e-6"},
                     dir / "storage") == 4);

  const auto x = linspace(0.0, 300e-6, 12);
  const auto y = eval_model(ModelShape::exp_decay, std::vector<double>{1.0, 95e-6}, x);
  fs::create_directories(dir / "in");
  std::ofstream(dir / "in" / "decay.csv") << to_csv({"t_s", "efficiency"}, {x, y});
  CHECK(check_replay({"fit", "--shape", "exp-decay", "--data", (dir / "in" / "decay.csv").string(),
                      "--bootstrap", "50"},
                     dir / "fit") == 2);

  std::string traces;
  for (const char* role : {"I", "I0", "B"}) {
    for (int run = 0; run < 3; ++run) {
      traces += std::string("# x_unit=Hz,role=") + role + ",run_id=" + std::to_string(run) + "\n";
      for (int i = 0; i < 21; ++i) {
        const double v = role[0] == 'B' ? 0.1 : (role[1] == '0' ? 2.0 : 1.0 + 0.01 * i + 0.001 * run);
        traces += format_double(-1e4 + 1e3 * i) + "," + format_double(v) + "\n";
      }
    }
  }
  std::ofstream(dir / "in" / "traces.csv") << traces;
  CHECK(check_replay({"analyze", "--traces", (dir / "in" / "traces.csv").string(), "--temperature", "318"},
                     dir / "analyze") == 2);
}

TEST_CASE("replay refuses modified inputs") {
  const auto dir = oracle::scratch_dir("cli-tamper");
  const auto x = linspace(0.0, 10.0, 8);
  std::ofstream(dir / "line.csv") << to_csv({"x", "y"}, {x, x});
  REQUIRE(cli({"fit", "--shape", "linear", "--data", (dir / "line.csv").string(), "--out", (dir / "a").string()})
              .code == 0);
  std::ofstream(dir / "line.csv") << to_csv({"x", "y"}, {x, linspace(1.0, 2.0, 8)});
  const Run r = cli({"run", "--from-manifest", (dir / "a" / "manifest.json").string(), "--out",
                     (dir / "b").string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("sha256") != std::string::npos);
}

}  // TEST_SUITE
