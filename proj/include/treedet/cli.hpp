#pragma once

#include "treedet/model.hpp"
#include "treedet/search.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace treedet::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, budget_error = 3 };

// Message is "<source>:<line>: <what>".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct ExperimentConfig {
  std::string source = "<config>";
  std::string scheme;
  int m = 2;
  int k = 2;
  int letter = 0;
  Probability delta;
  Probability prior0 = Probability::rational(1, 2);
  int t_min = 1;
  int t_max = 1;
  std::string engine = "float";  // float | rational | mc
  int engine_line = 1;
  std::uint64_t trials = 100000;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> analyses;
  double eta_min = 1e-9;
  std::optional<int> d;
  SearchMode search_mode = SearchMode::per_node;
  std::uint64_t max_combinations = std::uint64_t{1} << 20;
  int rational_max_t = 10;
  std::string out_dir = "out";

  ChannelSpec channel() const;
  bool wants(const std::string& analysis) const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

// Entry point shared by the executable and the tests.
int main(int argc, char** argv);
int run_command_line(const std::vector<std::string>& args);

}  // namespace treedet::cli
