#pragma once

#include "rcw/conditional.hpp"
#include "rcw/simulator.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rcw::cli {

enum class Subcommand { Test, Ci, Simulate, GenData };

struct CliConfig {
  Subcommand subcommand = Subcommand::Test;

  std::string data_path;
  ColumnSpec columns;

  std::string estimator = "2sls";
  std::string vcov = "hc";
  int bandwidth = 0;
  bool small_sample = false;
  std::optional<std::string> wald_form;  // unset: follows the estimator
  std::string plugin = "estimate";
  std::optional<double> cue_lower;
  std::optional<double> cue_upper;

  std::vector<double> beta0;
  double alpha = 0.05;
  std::optional<std::size_t> draws;  // unset: 20000 for test, 4000 for ci
  std::uint64_t seed = 0;

  std::optional<double> grid_lo;
  std::optional<double> grid_hi;
  int grid_points = 401;

  // simulate / gen-data
  std::vector<double> mu2{16.0};
  std::vector<std::string> error_kinds{"homoskedastic"};
  long n = 400;
  long k = 4;
  double rho = 0.9;
  int clusters = 25;
  double eta = 0.5;
  double beta_true = 0.0;
  std::vector<double> offsets{0.0};
  std::size_t reps = 100;
  std::optional<std::string> table_path;

  std::optional<std::string> output;
  std::optional<int> threads;
};

// Throws rcw::Error(InvalidArgument) on any invalid combination.
void validate(const CliConfig& config);

TestOptions test_options(const CliConfig& config);

// Each returns the process exit code. The JSON document goes to `out`
// unless config.output is set; failures print an error document to `err`.
int run_test(const CliConfig& config, std::ostream& out, std::ostream& err);
int run_ci(const CliConfig& config, std::ostream& out, std::ostream& err);
int run_simulate(const CliConfig& config, std::ostream& out, std::ostream& err);
int run_gen_data(const CliConfig& config, std::ostream& out, std::ostream& err);

// Full argument parsing and dispatch; main() is a one-line wrapper.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

void write_csv(std::ostream& os, const IVData& data);

}  // namespace rcw::cli
