#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwm/tag_io.hpp"

namespace {

std::string g_fwmlab;  // path to the CLI binary, first positional test argument

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

CmdResult run_cmd(const std::string& args) {
  const std::string full = "\"" + g_fwmlab + "\" " + args + " 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::filesystem::path fresh_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / ("fwm_cli_" + leaf);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Parse a CSV written by the tool: '#' preamble lines, a header, data rows.
struct Csv {
  std::vector<std::string> preamble;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  Csv csv;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      csv.preamble.push_back(line);
      continue;
    }
    if (!have_header) {
      csv.header = split_csv_line(line);
      have_header = true;
    } else {
      csv.rows.push_back(split_csv_line(line));
    }
  }
  return csv;
}

double field(const Csv& csv, std::size_t row, const std::string& name) {
  for (std::size_t c = 0; c < csv.header.size(); ++c)
    if (csv.header[c] == name) {
      REQUIRE(row < csv.rows.size());
      REQUIRE(c < csv.rows[row].size());
      return std::stod(csv.rows[row][c]);
    }
  FAIL("no column named ", name);
  return 0.0;
}

}  // namespace

TEST_CASE("tag files survive a write/read round trip") {
  const auto dir = fresh_dir("tagio");
  const std::string path = (dir / "tags.ptag").string();

  fwm::TagStream stream;
  stream.channel_id = 3;
  stream.timestamps = {0, 5, 5, 1234567890123ll, 9223372036854ll};
  fwm::write_tag_file(path, stream);
  const fwm::TagStream back = fwm::read_tag_file(path);
  CHECK(back.channel_id == stream.channel_id);
  CHECK(back.timestamps == stream.timestamps);

  fwm::TagStream bad;
  bad.channel_id = 0;
  bad.timestamps = {-1};
  CHECK_THROWS_AS(fwm::write_tag_file((dir / "bad.ptag").string(), bad), std::invalid_argument);
  CHECK_THROWS_AS(fwm::read_tag_file((dir / "missing.ptag").string()), std::runtime_error);

  {
    std::ofstream os(dir / "junk.ptag", std::ios::binary);
    os << "JUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(fwm::read_tag_file((dir / "junk.ptag").string()), std::runtime_error);

  // Bump the version word and expect a refusal.
  std::string bytes = slurp(path);
  bytes[4] = 2;
  {
    std::ofstream os(dir / "future.ptag", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(fwm::read_tag_file((dir / "future.ptag").string()), std::runtime_error);

  // Chop the payload and expect a refusal.
  {
    std::ofstream os(dir / "short.ptag", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
  }
  CHECK_THROWS_AS(fwm::read_tag_file((dir / "short.ptag").string()), std::runtime_error);
}

TEST_CASE("phase-match command reports the operating point") {
  const auto dir = fresh_dir("pm");
  const CmdResult r = run_cmd("phase-match --quiet --out \"" + dir.string() + "\"");
  CHECK(r.exit_code == 0);
  CHECK(r.output.empty());

  const Csv csv = read_csv(dir / "phase_match.csv");
  REQUIRE(csv.rows.size() == 1);
  CHECK(field(csv, 0, "matched") == 1.0);
  CHECK(field(csv, 0, "pressure_bar") == doctest::Approx(4.0));
  CHECK(field(csv, 0, "detuning_thz") == doctest::Approx(99.3).epsilon(1e-6));
  CHECK(field(csv, 0, "signal_nm") == doctest::Approx(769.655).epsilon(1e-5));
  CHECK(field(csv, 0, "idler_nm") == doctest::Approx(1570.29).epsilon(1e-5));

  const CmdResult loud = run_cmd("phase-match --out \"" + dir.string() + "\"");
  CHECK(loud.exit_code == 0);
  CHECK(loud.output.find("phase match") != std::string::npos);
}

TEST_CASE("sweep command walks the configured pressure range") {
  const auto dir = fresh_dir("sweep");
  const CmdResult r = run_cmd("sweep --quiet --out \"" + dir.string() + "\"");
  CHECK(r.exit_code == 0);

  const Csv csv = read_csv(dir / "pressure_sweep.csv");
  REQUIRE(csv.rows.size() == 21);  // 1.0 .. 6.0 bar in 0.25 bar steps
  CHECK(field(csv, 0, "pressure_bar") == doctest::Approx(1.0));
  CHECK(field(csv, 20, "pressure_bar") == doctest::Approx(6.0));
  // Matching exists in a pressure pocket around 4 bar; the attainable idler
  // band across that pocket spans well past the 1530-1625 nm tuning window.
  int matched = 0;
  double idler_min = 1e9;
  double idler_max = 0.0;
  for (std::size_t i = 0; i < csv.rows.size(); ++i)
    if (field(csv, i, "matched") == 1.0) {
      ++matched;
      idler_min = std::min(idler_min, field(csv, i, "idler_nm"));
      idler_max = std::max(idler_max, field(csv, i, "idler_nm"));
    }
  CHECK(matched >= 4);
  CHECK(idler_min < 1530.0);
  CHECK(idler_max > 1625.0);
}

TEST_CASE("jsa command writes the Schmidt spectrum") {
  const auto dir = fresh_dir("jsa");
  const CmdResult r = run_cmd("jsa --quiet --grid 64 --out \"" + dir.string() + "\"");
  CHECK(r.exit_code == 0);

  const Csv csv = read_csv(dir / "jsa_schmidt.csv");
  double purity = 0.0;
  bool found_purity = false;
  for (const std::string& line : csv.preamble)
    if (line.rfind("# purity_filtered ", 0) == 0) {
      purity = std::stod(line.substr(18));
      found_purity = true;
    }
  REQUIRE(found_purity);
  CHECK(purity > 0.5);
  CHECK(purity <= 1.0);

  REQUIRE(csv.rows.size() >= 4);
  double sum = 0.0;
  double previous = 2.0;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const double lambda = field(csv, i, "lambda");
    CHECK(lambda >= 0.0);
    CHECK(lambda <= previous);
    previous = lambda;
    sum += lambda;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("simulate, correlate, and analyze chain end to end") {
  const auto run_dir = fresh_dir("chain_run");
  const CmdResult sim = run_cmd("simulate --quiet --pulses 4000000 --power-mw 30 --seed 11 --out \"" +
                                run_dir.string() + "\"");
  CHECK(sim.exit_code == 0);
  CHECK(std::filesystem::exists(run_dir / "tags_signal.ptag"));
  CHECK(std::filesystem::exists(run_dir / "tags_idler.ptag"));
  CHECK(std::filesystem::exists(run_dir / "run.json"));

  const fwm::TagStream signal = fwm::read_tag_file((run_dir / "tags_signal.ptag").string());
  const fwm::TagStream idler = fwm::read_tag_file((run_dir / "tags_idler.ptag").string());
  CHECK(signal.channel_id == 0);
  CHECK(idler.channel_id == 1);
  CHECK(signal.timestamps.size() > 1000);
  CHECK(std::is_sorted(signal.timestamps.begin(), signal.timestamps.end()));
  CHECK(std::is_sorted(idler.timestamps.begin(), idler.timestamps.end()));

  const auto cor_dir = fresh_dir("chain_cor");
  const CmdResult cor = run_cmd("correlate --quiet --run \"" + run_dir.string() + "\" --out \"" +
                                cor_dir.string() + "\"");
  CHECK(cor.exit_code == 0);
  const Csv hist = read_csv(cor_dir / "histogram.csv");
  CHECK(hist.rows.size() == 2 * 7143);
  const Csv coinc = read_csv(cor_dir / "coincidences.csv");
  REQUIRE(coinc.rows.size() == 1);
  CHECK(field(coinc, 0, "n_coinc") > 0.0);
  CHECK(field(coinc, 0, "n_acc_raw") >= 0.0);

  const auto ana_dir = fresh_dir("chain_ana");
  const CmdResult ana = run_cmd("analyze --quiet --run \"" + run_dir.string() + "\" --out \"" +
                                ana_dir.string() + "\"");
  CHECK(ana.exit_code == 0);
  const Csv metrics = read_csv(ana_dir / "metrics.csv");
  REQUIRE(metrics.rows.size() == 1);
  REQUIRE(metrics.rows[0].size() == metrics.header.size());
  CHECK(field(metrics, 0, "n_pulses") == 4000000.0);
  CHECK(field(metrics, 0, "singles_s") == static_cast<double>(signal.timestamps.size()));
  CHECK(field(metrics, 0, "n_coinc") == field(coinc, 0, "n_coinc"));
  CHECK(field(metrics, 0, "car") > 1.0);
  CHECK(std::isfinite(field(metrics, 0, "g2_cross")));
  // Two-detector runs cannot measure the splitter autocorrelations.
  CHECK(std::isnan(field(metrics, 0, "g2_heralded")));
  CHECK(std::isnan(field(metrics, 0, "g2_unheralded")));
}

TEST_CASE("identical seeds give byte-identical outputs regardless of threads") {
  const auto dir_a = fresh_dir("det_a");
  const auto dir_b = fresh_dir("det_b");
  const std::string args = "--quiet --pulses 3000000 --power-mw 60 --seed 202 ";
  CHECK(run_cmd("simulate " + args + "--threads 1 --out \"" + dir_a.string() + "\"").exit_code == 0);
  CHECK(run_cmd("simulate " + args + "--threads 4 --out \"" + dir_b.string() + "\"").exit_code == 0);
  CHECK(slurp(dir_a / "tags_signal.ptag") == slurp(dir_b / "tags_signal.ptag"));
  CHECK(slurp(dir_a / "tags_idler.ptag") == slurp(dir_b / "tags_idler.ptag"));
  CHECK(slurp(dir_a / "run.json") == slurp(dir_b / "run.json"));

  const auto ana_a = fresh_dir("det_ana_a");
  const auto ana_b = fresh_dir("det_ana_b");
  CHECK(run_cmd("analyze --quiet --run \"" + dir_a.string() + "\" --out \"" + ana_a.string() +
                "\"").exit_code == 0);
  CHECK(run_cmd("analyze --quiet --run \"" + dir_b.string() + "\" --out \"" + ana_b.string() +
                "\"").exit_code == 0);
  CHECK(slurp(ana_a / "metrics.csv") == slurp(ana_b / "metrics.csv"));
}

TEST_CASE("three-channel runs populate the splitter estimators") {
  const auto run_dir = fresh_dir("three_run");
  const CmdResult sim = run_cmd(
      "simulate --quiet --three-channel --pulses 4000000 --power-mw 100 --seed 13 --out \"" +
      run_dir.string() + "\"");
  CHECK(sim.exit_code == 0);
  CHECK(std::filesystem::exists(run_dir / "tags_signal.ptag"));
  CHECK(std::filesystem::exists(run_dir / "tags_idler1.ptag"));
  CHECK(std::filesystem::exists(run_dir / "tags_idler2.ptag"));

  const auto ana_dir = fresh_dir("three_ana");
  const CmdResult ana = run_cmd("analyze --quiet --run \"" + run_dir.string() + "\" --out \"" +
                                ana_dir.string() + "\"");
  CHECK(ana.exit_code == 0);
  const Csv metrics = read_csv(ana_dir / "metrics.csv");
  REQUIRE(metrics.rows.size() == 1);
  CHECK(std::isfinite(field(metrics, 0, "g2_heralded")));
  CHECK(std::isfinite(field(metrics, 0, "g2_unheralded")));
  CHECK(field(metrics, 0, "g2_unheralded") > 0.0);
}

TEST_CASE("bad invocations fail with a nonzero exit") {
  CHECK(run_cmd("").exit_code != 0);
  CHECK(run_cmd("no-such-command").exit_code != 0);
  CHECK(run_cmd("simulate --no-such-flag").exit_code != 0);

  const CmdResult bad_config = run_cmd("phase-match --config /nonexistent/f.json --out /tmp");
  CHECK(bad_config.exit_code == 1);
  CHECK(bad_config.output.find("cannot open config") != std::string::npos);

  const CmdResult bad_run = run_cmd("correlate --run /nonexistent --out /tmp");
  CHECK(bad_run.exit_code == 1);
  CHECK(bad_run.output.find("error:") != std::string::npos);
}

int main(int argc, char** argv) {
  std::vector<char*> args;
  args.push_back(argv[0]);
  for (int i = 1; i < argc; ++i) {
    if (g_fwmlab.empty() && argv[i][0] != '-') {
      g_fwmlab = argv[i];
      continue;
    }
    args.push_back(argv[i]);
  }
  if (g_fwmlab.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-fwmlab> [doctest options]\n");
    return 2;
  }
  doctest::Context context(static_cast<int>(args.size()), args.data());
  return context.run();
}
