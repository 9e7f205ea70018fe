#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include <pottslab/cli.hpp>

namespace fs = std::filesystem;
using pottslab::cli::run_command;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_command(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("pottslab-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int shell(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ThresholdsJson) {
  auto r = run({"thresholds", "--q", "3", "--delta", "3", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["Bu"].get<double>(), 3.8284271, 1e-7);
  EXPECT_NEAR(j["Bo"].get<double>(), 3.8473221, 1e-7);
  EXPECT_NEAR(j["Brc"].get<double>(), 4.0, 1e-12);
  EXPECT_EQ(j["command"], "thresholds");
  EXPECT_EQ(j["seed"], 1);
  EXPECT_EQ(j["config"]["q"], 3);
  EXPECT_EQ(j["config"]["delta"], 3);
}

TEST(Cli, ThresholdTableOrdering) {
  auto r = run({"thresholds", "--q", "3", "--delta", "3", "--q-max", "8", "--delta-max", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 37u);
  EXPECT_EQ(rows[0][5], "ordering");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][5], "ok") << "row " << i;
  EXPECT_EQ(rows[1][0], "3");
  EXPECT_EQ(rows[1][1], "3");
  EXPECT_EQ(rows.back()[0], "8");
  EXPECT_EQ(rows.back()[1], "8");
}

TEST(Cli, MomentsUniformRow) {
  auto r = run({"moments", "--model", "potts", "--q", "3", "--B", "2", "--delta", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0][3], "psi1");
  EXPECT_NEAR(std::stod(rows[1][0]), 1.0 / 3, 1e-12);
  EXPECT_NEAR(std::stod(rows[1][3]), 1.530135, 1e-6);
  EXPECT_NE(r.out.find("# units:"), std::string::npos);
  EXPECT_NE(r.out.find("psi1=nats"), std::string::npos);
}

TEST(Cli, MomentsAtGivenPhaseAndExactN) {
  auto r = run({"moments", "--q", "2", "--B", "2", "--delta", "3", "--alpha", "0.5,0.5", "--exact-n", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NE(std::find(rows[0].begin(), rows[0].end(), "ln_first_moment"), rows[0].end());
  EXPECT_EQ(run({"moments", "--q", "2", "--B", "2", "--delta", "3", "--exact-n", "4"}).code, 1);
  EXPECT_EQ(run({"moments", "--q", "2", "--B", "2", "--delta", "3", "--alpha", "0.7,0.7"}).code, 1);
}

TEST(Cli, EmptyGridGivesHeaderOnly) {
  auto r = run({"phase-diagram", "--q", "3", "--delta", "3", "--B-steps", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][0], "B");
}

TEST(Cli, PhaseDiagramSweep) {
  auto r = run({"phase-diagram", "--q", "3", "--delta", "3", "--B-from", "3.83", "--B-to", "3.99", "--B-steps", "17",
                "--threads", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 18u);
  double prevB = 0, prevDif = -1e9;
  bool negative = false, positive = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double B = std::stod(rows[i][0]), dif = std::stod(rows[i][2]);
    EXPECT_GT(B, prevB);
    EXPECT_GT(dif, prevDif);
    negative |= dif < 0;
    positive |= dif > 0;
    prevB = B;
    prevDif = dif;
  }
  EXPECT_TRUE(negative && positive);
  auto serial = run({"phase-diagram", "--q", "3", "--delta", "3", "--B-from", "3.83", "--B-to", "3.99", "--B-steps",
                     "17", "--threads", "1"});
  EXPECT_EQ(serial.out, r.out);
}

TEST(Cli, PhaseDiagramRowErrors) {
  auto r = run({"phase-diagram", "--q", "3", "--delta", "3", "--B-from", "-1", "--B-to", "2", "--B-steps", "4"});
  EXPECT_EQ(r.code, 1);
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_FALSE(rows[1].back().empty());
  EXPECT_TRUE(rows.back().back().empty());
}

TEST(Cli, FixpointsAndNorm) {
  auto fx = run({"fixpoints", "--q", "3", "--B", "3.9", "--delta", "3", "--json"});
  ASSERT_EQ(fx.code, 0) << fx.err;
  auto j = nlohmann::json::parse(fx.out);
  EXPECT_EQ(j["command"], "fixpoints");
  auto n = run({"norm", "--q", "3", "--B", "2", "--delta", "3"});
  ASSERT_EQ(n.code, 0) << n.err;
  EXPECT_NE(n.out.find("1.66536635"), std::string::npos);
  EXPECT_EQ(run({"norm", "--q", "3", "--B", "2"}).code, 1);
}

TEST(Cli, UsageErrors) {
  auto unknown = run({"thresholds", "--q", "3", "--delta", "3", "--nope"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.err.find("--nope"), std::string::npos);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"thresholds", "--q", "1", "--delta", "3"}).code, 1);
  EXPECT_EQ(run({"verify", "--suite", "nothing"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, GuardViolationExitsTwo) {
  TempDir dir;
  auto g = dir / "big.graph";
  ASSERT_EQ(run({"graph", "sample", "--n", "12", "--delta", "3", "--out", g.string()}).code, 0);
  auto r = run({"sw", "exact", "--graph", g.string(), "--q", "3", "--B", "2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({"graph", "enumerate", "--n", "6", "--delta", "3", "--q", "2", "--B", "2"}).code, 2);
}

TEST(Cli, GraphCommands) {
  TempDir dir;
  auto g = dir / "g.graph";
  ASSERT_EQ(run({"--seed", "4", "graph", "sample", "--n", "6", "--delta", "3", "--out", g.string()}).code, 0);
  std::ifstream f(g);
  auto G = pottslab::read_graph(f);
  EXPECT_EQ(G.n, 6);
  for (int d : G.degrees()) EXPECT_EQ(d, 3);
  EXPECT_NE(slurp(g).find("# command"), std::string::npos);

  auto cyc = run({"graph", "cycles", "--graph", g.string(), "--kmax", "3"});
  ASSERT_EQ(cyc.code, 0) << cyc.err;
  auto counts = pottslab::count_cycles(G, 3);
  auto rows = csv_rows(cyc.out);
  ASSERT_EQ(rows.size(), 4u);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(rows[k][0], std::to_string(k));
    EXPECT_EQ(std::stoull(rows[k][1]), counts[k - 1]);
  }

  auto en = run({"graph", "enumerate", "--n", "2", "--delta", "3", "--q", "2", "--B", "2"});
  ASSERT_EQ(en.code, 0) << en.err;
  auto enRows = csv_rows(en.out);
  ASSERT_EQ(enRows.size(), 2u);
  EXPECT_EQ(enRows[1][0], "15");

  auto gd = dir / "gadget.graph";
  ASSERT_EQ(run({"gadget", "--delta", "3", "--trees", "2", "--depth", "2", "--core", "16", "--out", gd.string()}).code,
            0);
  std::ifstream gf(gd);
  auto gadget = pottslab::read_graph(gf);
  EXPECT_EQ(gadget.vertices_with(pottslab::Role::rootPlus).size(), 2u);
  EXPECT_TRUE(gadget.is_bipartite());

  auto host = dir / "host.graph";
  {
    std::ofstream h(host);
    pottslab::RegularGraph tri;
    tri.n = 3;
    tri.delta = 2;
    tri.edges = {{0, 1}, {1, 2}, {0, 2}};
    pottslab::write_graph(h, tri);
  }
  auto red = dir / "red.graph";
  auto rr = run({"reduce", "--graph", host.string(), "--q", "3", "--B", "3.9", "--out", red.string()});
  ASSERT_EQ(rr.code, 0) << rr.err;
  EXPECT_NE(slurp(red).find("# constants"), std::string::npos);
  std::ifstream rf(red);
  EXPECT_EQ(pottslab::read_graph(rf).max_degree(), 3);
  EXPECT_EQ(run({"graph", "reduce", "--graph", host.string(), "--out", (dir / "r2.graph").string()}).code, 0);
}

TEST(Cli, SwRunTraceAndRerun) {
  TempDir dir;
  auto g = dir / "g.graph";
  ASSERT_EQ(run({"graph", "sample", "--n", "60", "--delta", "3", "--out", g.string()}).code, 0);
  std::vector<std::string> args = {"--seed", "9",           "sw",      "run",   "--graph", g.string(),
                                   "--q",    "3",           "--B",     "3.9",   "--steps", "50",
                                   "--start", "ordered:2", "--csv",   (dir / "a.csv").string()};
  ASSERT_EQ(run(args).code, 0);
  args.back() = (dir / "b.csv").string();
  ASSERT_EQ(run(args).code, 0);
  auto a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
  auto strip = [](std::string s) {
    std::string outLine = "# config.csv";
    auto p = s.find(outLine);
    if (p != std::string::npos) s.erase(p, s.find('\n', p) - p);
    return s;
  };
  EXPECT_EQ(strip(a), strip(b));
  EXPECT_NE(a.find("# seed: 9"), std::string::npos);
  EXPECT_NE(a.find("# config.B: 3.9"), std::string::npos);
  auto rows = csv_rows(a);
  ASSERT_EQ(rows.size(), 52u);
  EXPECT_EQ(rows[0][0], "t");
  EXPECT_EQ(rows[1][3], "2");
  for (const auto& f : fs::directory_iterator(dir.path()))
    EXPECT_EQ(f.path().filename().string().find(".tmp"), std::string::npos) << f.path();
  EXPECT_EQ(run({"sw", "run", "--graph", g.string(), "--q", "3", "--B", "3.9", "--start", "ordered:4"}).code, 1);
  EXPECT_EQ(run({"sw", "run", "--graph", g.string(), "--q", "3", "--B", "3.9", "--start", "sideways"}).code, 1);
}

TEST(Cli, SwExact) {
  TempDir dir;
  auto g = dir / "tri.graph";
  {
    std::ofstream h(g);
    pottslab::RegularGraph tri;
    tri.n = 3;
    tri.delta = 2;
    tri.edges = {{0, 1}, {1, 2}, {0, 2}};
    pottslab::write_graph(h, tri);
  }
  auto r = run({"sw", "exact", "--graph", g.string(), "--q", "3", "--B", "2", "--cut", "phase:2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "27");
  EXPECT_LT(std::stod(rows[1][1]), 1e-12);
  EXPECT_LT(std::stod(rows[1][2]), 1e-12);
  EXPECT_LT(std::stod(rows[1][3]), 1e-12);
  EXPECT_GT(std::stod(rows[1][5]), 0);
}

TEST(Cli, ConfigFileOverridesFlags) {
  TempDir dir;
  auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"q": 4, "delta": 3, "json": true})";
  auto r = run({"thresholds", "--q", "3", "--delta", "3", "--config", cfg.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["config"]["q"], 4);
  auto direct = nlohmann::json::parse(run({"thresholds", "--q", "4", "--delta", "3", "--json"}).out);
  EXPECT_EQ(j["Bo"], direct["Bo"]);
  std::ofstream(dir / "bad.json") << "[1, 2]";
  EXPECT_EQ(run({"thresholds", "--q", "3", "--delta", "3", "--config", (dir / "bad.json").string()}).code, 1);
  EXPECT_EQ(run({"thresholds", "--q", "3", "--delta", "3", "--config", (dir / "missing.json").string()}).code, 1);
}

TEST(Cli, AtomicFileOutput) {
  TempDir dir;
  auto out = dir / "t.csv";
  std::ofstream(out) << "stale";
  ASSERT_EQ(run({"thresholds", "--q", "3", "--delta", "3", "--csv", out.string()}).code, 0);
  auto text = slurp(out);
  EXPECT_EQ(text.find("stale"), std::string::npos);
  EXPECT_EQ(text.rfind("# command: thresholds", 0), 0u);
  int files = 0;
  for ([[maybe_unused]] const auto& f : fs::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1);
}

TEST(Cli, BinaryExitCodesAndSeedEnvironment) {
  const std::string bin = POTTSLAB_CLI_PATH;
  TempDir dir;
  auto g = dir / "g.graph";
  EXPECT_EQ(shell(bin + " thresholds --q 3 --delta 3 --json > /dev/null"), 0);
  EXPECT_EQ(shell(bin + " thresholds --q 3 --delta 3 --wrong > /dev/null 2>&1"), 1);
  EXPECT_EQ(shell("POTTSLAB_SEED=17 " + bin + " graph sample --n 8 --delta 3 --out " + g.string()), 0);
  EXPECT_NE(slurp(g).find("17"), std::string::npos);
  auto h = dir / "h.graph";
  EXPECT_EQ(shell(bin + " --seed 17 graph sample --n 8 --delta 3 --out " + h.string()), 0);
  EXPECT_EQ(slurp(g), slurp(h));
  EXPECT_EQ(shell(bin + " graph enumerate --n 8 --delta 3 --q 2 --B 2 > /dev/null 2>&1"), 2);
}
