#include <cstdlib>
#include <optional>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "optopulse_cli/app.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace optopulse::cli;

const fs::path kConfigs = OPTOPULSE_CONFIG_DIR;

struct Outcome {
  int code = 0;
  std::string log;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("optopulse_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path write_config(const std::string& name, const json& j) const {
    const fs::path p = root_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  Outcome run(std::string_view command, const fs::path& config, const std::string& out, unsigned threads = 1,
          std::optional<std::uint64_t> seed = {}) const {
    RunOptions o;
    o.config = config;
    o.out = root_ / out;
    o.threads = threads;
    o.seed = seed;
    std::ostringstream log, err;
    const int code = run_command(command, o, log, err);
    return {code, log.str(), err.str()};
  }

  json read_json(const std::string& out, const std::string& file) const {
    std::ifstream in(root_ / out / file);
    return json::parse(in);
  }

  std::string read_text(const std::string& out, const std::string& file) const {
    std::ifstream in(root_ / out / file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path root_;
};

json vacuum_tomography(double chi) {
  return {{"format", "tomography-config v1"},
          {"state", {{"kind", "vacuum"}, {"n_max", 20}}},
          {"measurement", {{"chi", chi}}},
          {"angles", 24}};
}

TEST_F(Cli, MissingFieldNamesItsPath) {
  json j = json::parse(std::ifstream(kConfigs / "pulse.json"));
  j["physical"].erase("finesse");
  const Outcome r = run("pulse", write_config("c.json", j), "out");
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("physical.finesse"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(root_ / "out" / "manifest.json"));
}

TEST_F(Cli, UnknownKeyIsRejected) {
  json j = vacuum_tomography(1.5);
  j["measurement"]["chii"] = 2.0;
  const Outcome r = run("tomography", write_config("c.json", j), "out");
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("measurement.chii"), std::string::npos) << r.err;
}

TEST_F(Cli, StepErrorsCarryIndices) {
  json j = json::parse(std::ifstream(kConfigs / "forced_outcomes.json"));
  j["sequence"]["steps"][1] = {{"evolve", {{"duration", 1e-6}}}};
  const Outcome r = run("purify", write_config("c.json", j), "out");
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("mechanical_frequency"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("sequence.steps[1]"), std::string::npos) << r.err;
}

TEST_F(Cli, MalformedJsonAndWrongFormat) {
  const fs::path bad = root_ / "bad.json";
  std::ofstream(bad) << "{ \"format\": ";
  EXPECT_EQ(run("pulse", bad, "a").code, kConfigError);
  json j = vacuum_tomography(1.5);
  j["format"] = "tomography-config v2";
  const Outcome r = run("tomography", write_config("c.json", j), "b");
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("format"), std::string::npos);
  EXPECT_EQ(run("pulse", root_ / "missing.json", "c").code, kConfigError);
}

TEST_F(Cli, ZeroStrengthIsNumericError) {
  const Outcome r = run("tomography", write_config("c.json", vacuum_tomography(0.0)), "out");
  EXPECT_EQ(r.code, kNumericError);
  EXPECT_NE(r.err.find("no position information"), std::string::npos) << r.err;
}

TEST_F(Cli, PulseSummary) {
  const Outcome r = run("pulse", kConfigs / "pulse.json", "out");
  ASSERT_EQ(r.code, kSuccess) << r.err;
  const json s = read_json("out", "summary.json");
  EXPECT_EQ(s.at("format"), "pulse-summary v1");
  EXPECT_NEAR(s.at("chi").get<double>(), 1.5247, 1e-3);
  EXPECT_GE(s.at("omega").get<double>(), 7e3);
  EXPECT_LE(s.at("omega").get<double>(), 1.1e4);
  EXPECT_NEAR(s.at("x0").get<double>(), 1.83e-15, 0.02e-15);
  EXPECT_EQ(s.at("finite_evolution").at("xi").size(), 3u);
  const std::string env = read_text("out", "envelopes.csv");
  EXPECT_EQ(env.rfind("# pulse envelopes v1\n", 0), 0u);
  const json m = read_json("out", "manifest.json");
  EXPECT_EQ(m.at("format"), "run-manifest v1");
  EXPECT_EQ(m.at("command"), "pulse");
}

TEST_F(Cli, VacuumTomography) {
  const Outcome r = run("tomography", kConfigs / "vacuum_tomography.json", "out");
  ASSERT_EQ(r.code, kSuccess) << r.err;
  const json rep = read_json("out", "report.json");
  EXPECT_NEAR(rep.at("var_x").get<double>(), 0.5, 0.01);
  EXPECT_NEAR(rep.at("var_p").get<double>(), 0.5, 0.01);
  EXPECT_GE(rep.at("fidelity").get<double>(), 0.999);
  EXPECT_TRUE(rep.at("fringe_visibility").at("bare").is_null());
  EXPECT_TRUE(fs::exists(root_ / "out" / "wigner.csv"));
  EXPECT_FALSE(fs::exists(root_ / "out" / "tomogram.json"));
}

TEST_F(Cli, PurifyIdealAndBath) {
  ASSERT_EQ(run("purify", kConfigs / "purify_ideal.json", "ideal").code, kSuccess);
  EXPECT_NEAR(read_json("ideal", "summary.json").at("n_eff").get<double>(), 0.047, 1e-3);
  ASSERT_EQ(run("purify", kConfigs / "purify_bath.json", "bath").code, kSuccess);
  const json s = read_json("bath", "summary.json");
  EXPECT_NEAR(s.at("n_eff").get<double>(), 0.15, 0.05);
  EXPECT_NEAR(s.at("bath_nbar").get<double>(), 4.17e4, 0.01e4);
}

TEST_F(Cli, ForcedSequenceTable) {
  ASSERT_EQ(run("purify", kConfigs / "forced_outcomes.json", "out").code, kSuccess);
  std::istringstream table(read_text("out", "neff.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(table, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "# protocol snapshots v1");
  EXPECT_EQ(rows[3].substr(0, 8), "1,pulse,");
  EXPECT_NE(rows[3].find("3.91709844"), std::string::npos) << rows[3];
  EXPECT_NE(rows[3].find("0.21761658"), std::string::npos) << rows[3];
}

TEST_F(Cli, RerunsAreByteIdentical) {
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  const std::vector<std::pair<std::string, fs::path>> cases{
      {"pulse", kConfigs / "pulse.json"},
      {"tomography", kConfigs / "vacuum_tomography.json"},
      {"purify", kConfigs / "sampled_sequence.json"}};
  for (const auto& [command, config] : cases) {
    ASSERT_EQ(run(command, config, command + "_a").code, kSuccess);
    ASSERT_EQ(run(command, config, command + "_b", 3).code, kSuccess);
    for (const auto& entry : fs::directory_iterator(root_ / (command + "_a"))) {
      const std::string name = entry.path().filename().string();
      if (name == "manifest.json") continue;
      EXPECT_EQ(read_text(command + "_a", name), read_text(command + "_b", name)) << command << '/' << name;
    }
    json ma = read_json(command + "_a", "manifest.json"), mb = read_json(command + "_b", "manifest.json");
    EXPECT_EQ(ma.at("timestamp"), mb.at("timestamp"));
  }
  ::unsetenv("SOURCE_DATE_EPOCH");
}

TEST_F(Cli, SeedOverrideChangesSampledOutcomes) {
  ASSERT_EQ(run("purify", kConfigs / "sampled_sequence.json", "a").code, kSuccess);
  ASSERT_EQ(run("purify", kConfigs / "sampled_sequence.json", "b", 1, 5).code, kSuccess);
  EXPECT_NE(read_text("a", "neff.csv"), read_text("b", "neff.csv"));
  EXPECT_EQ(read_json("b", "manifest.json").at("master_seed"), 5);
}

TEST_F(Cli, ArgumentErrors) {
  std::vector<std::string> args{"optopulse", "tomography", "--out", (root_ / "x").string()};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  EXPECT_EQ(main_entry(static_cast<int>(argv.size()), argv.data()), kConfigError);

  std::vector<std::string> args2{"optopulse", "pulse", "--config", (kConfigs / "pulse.json").string(), "--out",
                                 (root_ / "y").string(), "--threads", "0"};
  std::vector<char*> argv2;
  for (auto& a : args2) argv2.push_back(a.data());
  EXPECT_EQ(main_entry(static_cast<int>(argv2.size()), argv2.data()), kConfigError);
}

}  // namespace
