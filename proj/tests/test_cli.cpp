#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"

using namespace mveq::cli;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mveq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  const auto config =
      parse_command_line(static_cast<int>(argv.size()), argv.data(), out, err, o.code);
  if (config) o.code = run(*config, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<double> csv_numbers(const std::string& line) {
  std::vector<double> v;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) v.push_back(std::stod(cell));
  return v;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST(Cli, ReproduceExampleSucceeds) {
  const Outcome o = invoke({"reproduce-example"});
  EXPECT_EQ(o.code, kExitOk) << o.out << o.err;
}

TEST(Cli, SolveOpenLoopCsvRows) {
  const Outcome o = invoke({"solve-open-loop", "--market", "example-2", "--format", "csv"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const auto rows = lines(o.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "stage,K_1,K_2,K_3,c_1,c_2,c_3");
  const auto k3 = csv_numbers(rows[4]);
  EXPECT_EQ(k3[0], 3);
  EXPECT_NEAR(k3[1], 0.4739, 5e-4);
  EXPECT_NEAR(k3[3], 2.7381, 5e-4);
}

TEST(Cli, SolveFeedbackCsvStageOne) {
  const Outcome o = invoke({"solve-feedback", "--format", "csv"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const auto rows = lines(o.out);
  ASSERT_EQ(rows.size(), 5u);
  const auto k1 = csv_numbers(rows[2]);
  EXPECT_EQ(k1[0], 1);
  EXPECT_NEAR(k1[1], 0.0168, 5e-4);
  EXPECT_NEAR(k1[2], 0.0273, 5e-4);
  EXPECT_NEAR(k1[3], 0.0971, 5e-4);
}

TEST(Cli, RangeFailureExitsWithNonexistence) {
  const auto path = temp_file("mveq_range_failure.json", R"({"horizon": 2, "num_assets": 2,
      "riskless": 1.03, "mean_returns": [1.03, 1.13],
      "return_cov": [[1, 0], [0, 0]], "mu1": 1, "mu2": 1})");
  const Outcome o = invoke({"solve-open-loop", "--market", path.string()});
  EXPECT_EQ(o.code, kExitNonexistence);
  const std::string all = o.out + o.err;
  EXPECT_NE(all.find("stage 1"), std::string::npos) << all;
  EXPECT_NE(all.find("RangeCondition"), std::string::npos) << all;
  EXPECT_NE(all.find("1.000000e-01"), std::string::npos) << all;
  std::filesystem::remove(path);
}

TEST(Cli, ValidationErrorsExitTwo) {
  EXPECT_EQ(invoke({"solve-open-loop", "--tol-range", "-1"}).code, kExitValidation);
  EXPECT_EQ(invoke({"solve-open-loop", "--market", "/nonexistent/market.json"}).code,
            kExitValidation);
  EXPECT_EQ(invoke({"solve-open-loop", "--format", "xml"}).code, kExitValidation);
  EXPECT_EQ(invoke({"solve-open-loop", "--bogus"}).code, kExitValidation);
  EXPECT_EQ(invoke({"simulate", "--paths", "1"}).code, kExitValidation);
  EXPECT_EQ(invoke({"verify", "--solver", "nope"}).code, kExitValidation);
  EXPECT_EQ(invoke({"solve-open-loop", "--t", "4"}).code, kExitValidation);
}

TEST(Cli, InitialStageAndWealthOverride) {
  const Outcome o = invoke({"solve-open-loop", "--t", "2", "--x", "3", "--format", "csv"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_EQ(lines(o.out).size(), 3u);
}

TEST(Cli, SimulateIsByteIdentical) {
  for (const char* fmt : {"csv", "json"}) {
    const std::vector<std::string> args = {"simulate", "--paths", "5000", "--seed", "3",
                                           "--format", fmt};
    const Outcome a = invoke(args);
    const Outcome b = invoke(args);
    ASSERT_EQ(a.code, kExitOk) << a.err;
    EXPECT_EQ(a.out, b.out);
  }
  const Outcome j = invoke({"simulate", "--paths", "5000", "--format", "json"});
  const auto doc = nlohmann::json::parse(j.out);
  EXPECT_TRUE(doc.is_object());
}

TEST(Cli, BatchIsByteIdenticalWithOneRowPerDraw) {
  const std::vector<std::string> args = {"batch", "--draws", "5", "--seed", "9", "--format",
                                         "csv"};
  const Outcome a = invoke(args);
  const Outcome b = invoke(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines(a.out).size(), 6u);
  EXPECT_EQ(invoke({"batch", "--draws", "5", "--seed", "9", "--format", "json"}).out,
            invoke({"batch", "--draws", "5", "--seed", "9", "--format", "json"}).out);
}

TEST(Cli, VerifyReportsFailureUnderWrongSemantics) {
  EXPECT_EQ(invoke({"verify", "--solver", "open-loop"}).code, kExitOk);
  EXPECT_EQ(invoke({"verify", "--solver", "feedback", "--semantics", "open-loop"}).code,
            kExitVerification);
}

TEST(Cli, SolveMixedJsonCarriesPhi) {
  const Outcome o = invoke({"solve-mixed", "--phi", "example", "--format", "json"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const auto doc = nlohmann::json::parse(o.out);
  EXPECT_NE(o.out.find("phi"), std::string::npos);
  EXPECT_TRUE(doc.is_object());
}

TEST(Cli, OutWritesFile) {
  const auto path = std::filesystem::temp_directory_path() / "mveq_cli_out.csv";
  std::filesystem::remove(path);
  const Outcome o =
      invoke({"solve-open-loop", "--format", "csv", "--out", path.string()});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(lines(buf.str()).size(), 5u);
  std::filesystem::remove(path);
}

TEST(ParseCommandLine, DefaultsAndFlags) {
  const char* argv[] = {"mveq", "verify", "--atoms", "5", "--threads", "2", "--tol-verify",
                        "1e-6"};
  std::ostringstream out, err;
  int code = -1;
  const auto c = parse_command_line(8, argv, out, err, code);
  ASSERT_TRUE(c.has_value()) << err.str();
  EXPECT_EQ(c->command, Command::Verify);
  EXPECT_EQ(c->market, "li-duan-example-2");
  EXPECT_EQ(c->atoms, 5);
  EXPECT_EQ(c->threads, 2u);
  EXPECT_EQ(c->tol_verify, 1e-6);
  EXPECT_EQ(c->seed, 7u);
}

TEST(ParseCommandLine, HelpExitsZero) {
  const char* argv[] = {"mveq", "--help"};
  std::ostringstream out, err;
  int code = -1;
  EXPECT_FALSE(parse_command_line(2, argv, out, err, code).has_value());
  EXPECT_EQ(code, kExitOk);
  EXPECT_NE(out.str().find("solve-open-loop"), std::string::npos);
}

TEST(ValidateConfig, RejectsOutOfRange) {
  RunConfig c;
  EXPECT_NO_THROW(validate_config(c));
  c.tol_psd = 0.0;
  EXPECT_THROW(validate_config(c), std::invalid_argument);
  c = RunConfig{};
  c.command = Command::Batch;
  c.draws = 0;
  EXPECT_THROW(validate_config(c), std::invalid_argument);
  c = RunConfig{};
  c.threads = 0;
  EXPECT_THROW(validate_config(c), std::invalid_argument);
}
