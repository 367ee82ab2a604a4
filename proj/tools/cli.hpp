#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mveq::cli {

enum class Command {
  SolveOpenLoop,
  SolveFeedback,
  SolveMixed,
  Verify,
  Simulate,
  ReproduceExample,
  Batch
};

enum class OutputFormat { Pretty, Csv, Json };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNonexistence = 3;
inline constexpr int kExitVerification = 4;

struct RunConfig {
  Command command = Command::SolveOpenLoop;
  std::string market = "li-duan-example-2";  ///< preset name or JSON path
  std::optional<int> t;
  std::optional<double> x;

  double tol_range = 1e-8;
  double tol_psd = 1e-10;
  double tol_dagger = 1e-12;
  double tol_verify = 1e-7;  ///< relative: tol = tol_verify * max(1, |J*|)

  OutputFormat format = OutputFormat::Pretty;
  std::optional<std::string> out;
  std::optional<std::string> trace_out;

  std::uint64_t seed = 7;
  std::uint64_t paths = 100000;
  std::string phi = "zero";  ///< path | sample | zero | example
  int draws = 10;

  std::string solver = "open-loop";  ///< verify / simulate
  std::optional<std::string> semantics;
  std::optional<int> atoms;
  std::optional<std::uint64_t> tree_seed;
  std::string distribution = "gaussian";  ///< gaussian | tree
  unsigned threads = 1;
};

/// Throws std::invalid_argument when a field is out of range.
void validate_config(const RunConfig& config);

/// Parses argv. Returns nullopt after printing help or a parse error, with
/// the exit status in `exit_code`.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv,
                                            std::ostream& out, std::ostream& err,
                                            int& exit_code);

/// Executes one command. Output goes to `out` (or to config.out when set);
/// diagnostics to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace mveq::cli
