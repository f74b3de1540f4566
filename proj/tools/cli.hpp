#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "h2spec/h2spec.hpp"

namespace h2spec::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalError = 3 };

struct ProblemConfig {
  std::string geom = "circle";  // circle | grid1d | grid2d | grid3d
  int n = 1024;
  int n_per_axis = 0;           // grids: overrides n when positive
  int leaf_size = 32;
  std::string format = "h2";
  double eta = 1.0;
  double eps_h2 = -1.0;         // negative: 1e-2 * eps_ev
  double eps_ev = 1e-5;
  std::string matrix_file;
  std::string points_file;
  unsigned seed = 0;

  double effective_eps_h2() const { return eps_h2 > 0 ? eps_h2 : 1e-2 * eps_ev; }
};

struct EigConfig {
  ProblemConfig problem;
  std::optional<int> k;
  std::optional<std::pair<int, int>> k_range;
  std::optional<std::pair<double, double>> interval;
  int workers = 1;
  std::string parallel = "static";  // static | master
  int m = 4;
  std::string output;
  std::string csv;
  std::string task_log;
};

struct Problem {
  ClusterTree tree;
  RankStructuredMatrix H;
  double build_ms = 0.0;
};

// Throws std::invalid_argument on inconsistent settings.
void validate(const ProblemConfig& cfg);
Problem build_problem(const ProblemConfig& cfg);

struct ResultRecord {
  nlohmann::json config;
  std::string format;
  int n = 0;
  double interval_lo = 0.0;
  double interval_hi = 0.0;
  std::vector<EigenvalueEstimate> estimates;
  int max_rank = 0;
  std::size_t storage_bytes = 0;
  int inertia_evals = 0;
  double build_ms = 0.0;
  double solve_ms = 0.0;

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

nlohmann::json to_json(const ProblemConfig& cfg);
nlohmann::json to_json(const EigenvalueEstimate& e);
EigenvalueEstimate estimate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);

void write_estimates_csv(std::ostream& out, const std::vector<EigenvalueEstimate>& est);

ResultRecord run_eig(const EigConfig& cfg);

struct CompareRow {
  std::string format;
  int n = 0;
  int max_rank = 0;
  double build_ms = 0.0;
  double factor_ms = 0.0;
  double total_ms = 0.0;
};
// HSS and H2 on each size of the sweep (n for circle/grid1d, n per axis for grids).
std::vector<CompareRow> run_compare(const ProblemConfig& base, const std::vector<int>& sizes);
void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows);

struct InertiaRow {
  double mu = 0.0;
  InertiaCount count;
};
std::vector<InertiaRow> run_inertia(const ProblemConfig& cfg, const std::vector<double>& mus);
void write_inertia_csv(std::ostream& out, const std::vector<InertiaRow>& rows);

// Oracle-backed consistency checks; returns true when every check passes.
bool run_selftest(const std::string& level, bool inject_fault, std::ostream& log);

// Full command line entry point; returns the process exit code.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace h2spec::cli
