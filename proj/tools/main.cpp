#include <cstdlib>
#include <iostream>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("mveq");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("MV_EQ_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }

  int exit_code = 0;
  const auto config =
      mveq::cli::parse_command_line(argc, argv, std::cout, std::cerr, exit_code);
  if (!config) return exit_code;
  return mveq::cli::run(*config, std::cout, std::cerr);
}
