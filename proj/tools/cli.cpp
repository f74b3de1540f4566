#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>

namespace h2spec::cli {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

int grid_dim(const std::string& geom) {
  if (geom == "grid1d") return 1;
  if (geom == "grid2d") return 2;
  if (geom == "grid3d") return 3;
  return 0;
}

int axis_points(const ProblemConfig& cfg, int dim) {
  if (cfg.n_per_axis > 0) return cfg.n_per_axis;
  if (dim == 1) return cfg.n;
  const int a = static_cast<int>(std::lround(std::pow(double(cfg.n), 1.0 / dim)));
  int total = 1;
  for (int d = 0; d < dim; ++d) total *= a;
  if (total != cfg.n)
    throw std::invalid_argument("--n " + std::to_string(cfg.n) + " is not a perfect power for " + cfg.geom +
                                "; pass --n-per-axis");
  return a;
}

}  // namespace

void validate(const ProblemConfig& cfg) {
  if (cfg.matrix_file.empty() && cfg.points_file.empty()) {
    if (cfg.geom != "circle" && grid_dim(cfg.geom) == 0)
      throw std::invalid_argument("unknown geometry '" + cfg.geom + "' (expected circle, grid1d, grid2d, grid3d)");
    if (cfg.n < 1 && cfg.n_per_axis < 1) throw std::invalid_argument("--n must be positive");
  }
  if (cfg.leaf_size < 2) throw std::invalid_argument("--leaf-size must be at least 2");
  if (!(cfg.eps_ev > 0)) throw std::invalid_argument("--eps-ev must be positive");
  if (cfg.eps_h2 == 0 || std::isnan(cfg.eps_h2)) throw std::invalid_argument("--eps-h2 must be positive");
  if (!(cfg.eta > 0)) throw std::invalid_argument("--eta must be positive");
  parse_format(cfg.format);
}

Problem build_problem(const ProblemConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  PointCloud cloud;
  KernelFn kernel = laplace_kernel();
  if (!cfg.matrix_file.empty()) {
    auto A = std::make_shared<const Matrix>(read_symmetric_matrix(cfg.matrix_file));
    cloud = index_points(static_cast<int>(A->rows()));
    kernel = matrix_entry_kernel(A);
  } else if (!cfg.points_file.empty()) {
    cloud = read_point_cloud_file(cfg.points_file);
  } else if (cfg.geom == "circle") {
    cloud = generate_circle(cfg.n);
  } else {
    const int dim = grid_dim(cfg.geom);
    cloud = generate_grid(axis_points(cfg, dim), dim);
  }
  Problem p;
  p.tree = build_tree(cloud, sfc_order(cloud), cfg.leaf_size);
  const BlockStructure s = classify(p.tree, admissibility_for(parse_format(cfg.format), cfg.eta));
  p.H = construct(kernel, p.tree, s, cfg.effective_eps_h2());
  p.build_ms = ms_since(t0);
  return p;
}

nlohmann::json to_json(const ProblemConfig& cfg) {
  return {{"geom", cfg.geom},
          {"n", cfg.n},
          {"n_per_axis", cfg.n_per_axis},
          {"leaf_size", cfg.leaf_size},
          {"format", cfg.format},
          {"eta", cfg.eta},
          {"eps_h2", cfg.effective_eps_h2()},
          {"eps_ev", cfg.eps_ev},
          {"matrix_file", cfg.matrix_file},
          {"points_file", cfg.points_file},
          {"seed", cfg.seed}};
}

nlohmann::json to_json(const EigenvalueEstimate& e) {
  return {{"k", e.k},
          {"value", e.value},
          {"half_width", e.half_width},
          {"lower", e.lower},
          {"upper", e.upper},
          {"iterations", e.iterations},
          {"inertia_evals", e.inertia_evals},
          {"bracket_evals", e.bracket_evals},
          {"wall_time", e.wall_time_ms}};
}

EigenvalueEstimate estimate_from_json(const nlohmann::json& j) {
  EigenvalueEstimate e;
  e.k = j.at("k").get<int>();
  e.value = j.at("value").get<double>();
  e.half_width = j.at("half_width").get<double>();
  e.lower = j.value("lower", e.value - e.half_width);
  e.upper = j.value("upper", e.value + e.half_width);
  e.iterations = j.at("iterations").get<int>();
  e.inertia_evals = j.at("inertia_evals").get<int>();
  e.bracket_evals = j.value("bracket_evals", 0);
  e.wall_time_ms = j.at("wall_time").get<double>();
  return e;
}

nlohmann::json to_json(const ResultRecord& r) {
  nlohmann::json est = nlohmann::json::array();
  for (const auto& e : r.estimates) est.push_back(to_json(e));
  return {{"config", r.config},
          {"format", r.format},
          {"n", r.n},
          {"interval", {r.interval_lo, r.interval_hi}},
          {"estimates", est},
          {"max_rank", r.max_rank},
          {"storage_bytes", r.storage_bytes},
          {"inertia_evals", r.inertia_evals},
          {"build_ms", r.build_ms},
          {"solve_ms", r.solve_ms}};
}

ResultRecord record_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.config = j.at("config");
  r.format = j.at("format").get<std::string>();
  r.n = j.at("n").get<int>();
  r.interval_lo = j.at("interval").at(0).get<double>();
  r.interval_hi = j.at("interval").at(1).get<double>();
  for (const auto& e : j.at("estimates")) r.estimates.push_back(estimate_from_json(e));
  r.max_rank = j.at("max_rank").get<int>();
  r.storage_bytes = j.at("storage_bytes").get<std::size_t>();
  r.inertia_evals = j.at("inertia_evals").get<int>();
  r.build_ms = j.at("build_ms").get<double>();
  r.solve_ms = j.at("solve_ms").get<double>();
  return r;
}

void write_estimates_csv(std::ostream& out, const std::vector<EigenvalueEstimate>& est) {
  out << "k,value,half_width,iterations,inertia_evals,wall_time_ms\n";
  out << std::setprecision(17);
  for (const auto& e : est)
    out << e.k << ',' << e.value << ',' << e.half_width << ',' << e.iterations << ',' << e.inertia_evals << ','
        << e.wall_time_ms << '\n';
}

ResultRecord run_eig(const EigConfig& cfg) {
  Problem p = build_problem(cfg.problem);
  const int n = p.H.n();
  int k0 = 1, k1 = n;
  if (cfg.k) k0 = k1 = *cfg.k;
  if (cfg.k_range) std::tie(k0, k1) = *cfg.k_range;
  if (k0 < 1 || k1 > n || k0 > k1)
    throw std::invalid_argument("eigenvalue indices must satisfy 1 <= k0 <= k1 <= n = " + std::to_string(n));
  if (cfg.workers < 1) throw std::invalid_argument("--workers must be positive");
  if (cfg.parallel != "static" && cfg.parallel != "master")
    throw std::invalid_argument("--parallel must be static or master");

  Interval iv = default_interval(p.H);
  if (cfg.interval) {
    iv = {cfg.interval->first, cfg.interval->second};
    if (!(iv.lo < iv.hi)) throw std::invalid_argument("--interval requires a < b");
  }

  ResultRecord r;
  r.config = to_json(cfg.problem);
  r.config["workers"] = cfg.workers;
  r.config["parallel"] = cfg.parallel;
  r.config["m"] = cfg.m;
  r.format = format_name(p.H.format);
  r.n = n;
  r.interval_lo = iv.lo;
  r.interval_hi = iv.hi;
  r.max_rank = max_rank(p.H);
  r.storage_bytes = storage_bytes(p.H);
  r.build_ms = p.build_ms;

  const auto t0 = Clock::now();
  const double eps = cfg.problem.eps_ev;
  std::optional<ParallelRun> run;
  if (cfg.parallel == "master") {
    run = master_worker_solve(p.H, k0, k1, iv.lo, iv.hi, eps, cfg.workers, cfg.m);
  } else if (cfg.workers > 1) {
    run = static_partition_solve(p.H, k0, k1, iv.lo, iv.hi, eps, cfg.workers);
  } else {
    InertiaCache cache;
    r.estimates = slice_range(p.H, k0, k1, iv.lo, iv.hi, eps, &cache);
  }
  if (run) {
    r.estimates = run->estimates;
    if (!cfg.task_log.empty()) {
      std::ofstream log(cfg.task_log);
      if (!log) throw std::runtime_error("cannot write task log: " + cfg.task_log);
      write_task_log(log, *run);
    }
  }
  r.solve_ms = ms_since(t0);
  for (const auto& e : r.estimates) r.inertia_evals += e.inertia_evals + e.bracket_evals;
  return r;
}

std::vector<CompareRow> run_compare(const ProblemConfig& base, const std::vector<int>& sizes) {
  std::vector<CompareRow> rows;
  for (int size : sizes) {
    for (const char* fmt : {"hss", "h2"}) {
      ProblemConfig cfg = base;
      cfg.format = fmt;
      if (grid_dim(cfg.geom) >= 2) {
        cfg.n_per_axis = size;
      } else {
        cfg.n = size;
        cfg.n_per_axis = 0;
      }
      Problem p = build_problem(cfg);
      const auto t0 = Clock::now();
      inertia(p.H, 0.0);
      CompareRow row;
      row.format = fmt;
      row.n = p.H.n();
      row.max_rank = max_rank(p.H);
      row.build_ms = p.build_ms;
      row.factor_ms = ms_since(t0);
      row.total_ms = row.build_ms + row.factor_ms;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "format,n,max_rank,build_ms,factor_time_ms,total_time_ms\n";
  for (const auto& r : rows)
    out << r.format << ',' << r.n << ',' << r.max_rank << ',' << r.build_ms << ',' << r.factor_ms << ','
        << r.total_ms << '\n';
}

std::vector<InertiaRow> run_inertia(const ProblemConfig& cfg, const std::vector<double>& mus) {
  if (mus.empty()) throw std::invalid_argument("inertia: pass at least one shift with --mu");
  Problem p = build_problem(cfg);
  std::vector<InertiaRow> rows;
  for (double mu : mus) rows.push_back({mu, inertia(p.H, mu)});
  return rows;
}

void write_inertia_csv(std::ostream& out, const std::vector<InertiaRow>& rows) {
  out << "mu,mu_used,neg,zero,pos\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << r.mu << ',' << r.count.mu_used << ',' << r.count.neg << ',' << r.count.zero << ',' << r.count.pos
        << '\n';
}

namespace {

struct SelftestCase {
  std::string geom;
  int n;
  int n_per_axis;
};

// Shifts placed in the middle of well separated eigenvalue gaps.
std::vector<double> gap_shifts(const std::vector<double>& ev, int count, std::mt19937_64& rng) {
  const double scale = std::max(std::abs(ev.front()), std::abs(ev.back()));
  std::vector<double> shifts;
  std::uniform_int_distribution<int> pick(0, static_cast<int>(ev.size()) - 2);
  for (int attempt = 0; attempt < 100 * count && static_cast<int>(shifts.size()) < count; ++attempt) {
    const int j = pick(rng);
    if (ev[j + 1] - ev[j] > 1e-6 * scale) shifts.push_back(0.5 * (ev[j] + ev[j + 1]));
  }
  shifts.push_back(ev.front() - 1.0);
  shifts.push_back(ev.back() + 1.0);
  return shifts;
}

}  // namespace

bool run_selftest(const std::string& level, bool inject_fault, std::ostream& log) {
  if (level != "quick" && level != "full") throw std::invalid_argument("--level must be quick or full");
  struct FlipGuard {
    explicit FlipGuard(bool on) { testing_hooks::set_inertia_sign_flip(on); }
    ~FlipGuard() { testing_hooks::set_inertia_sign_flip(false); }
  } guard(inject_fault);

  const bool full = level == "full";
  std::vector<SelftestCase> cases = {{"circle", 128, 0}, {"grid1d", 128, 0}};
  if (full) {
    cases.push_back({"circle", 256, 0});
    cases.push_back({"grid3d", 0, 6});
  }
  const int shifts_per_case = full ? 25 : 8;
  std::mt19937_64 rng(12345);
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    log << (ok ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : "  " + detail) << '\n';
    all_ok = all_ok && ok;
  };

  for (const auto& c : cases) {
    for (const char* fmt : {"blr2", "hss", "h2"}) {
      ProblemConfig cfg;
      cfg.geom = c.geom;
      cfg.n = c.n;
      cfg.n_per_axis = c.n_per_axis;
      cfg.leaf_size = 16;
      cfg.format = fmt;
      cfg.eps_h2 = 1e-9;
      const Problem p = build_problem(cfg);
      const std::vector<double> ev = eig_oracle(reconstruct_dense(p.H));
      int mismatches = 0, checked = 0;
      for (double mu : gap_shifts(ev, shifts_per_case, rng)) {
        const int expect = static_cast<int>(std::lower_bound(ev.begin(), ev.end(), mu) - ev.begin());
        const InertiaCount got = inertia(p.H, mu);
        ++checked;
        if (got.neg != expect || got.neg + got.zero + got.pos != p.H.n()) ++mismatches;
      }
      std::ostringstream name;
      name << "sylvester " << c.geom << " n=" << p.H.n() << ' ' << fmt;
      report(name.str(), mismatches == 0,
             std::to_string(checked - mismatches) + "/" + std::to_string(checked) + " shifts agree");
    }
  }

  {
    // bisection on a diagonal matrix with a stub inertia function
    bool ok = true;
    std::string detail;
    for (auto [width, eps] : {std::pair{2048.0, 1e-5}, {4.0, 1e-3}, {1.0, 1e-8}}) {
      const double lambda = 0.3 * width;
      InertiaFn nu = [&](double mu) { return InertiaCount{mu > lambda ? 1 : 0, 0, mu > lambda ? 0 : 1, mu, 0}; };
      const EigenvalueEstimate e = slice_spectrum(nu, 1, 0.0, width, eps);
      ok = ok && e.inertia_evals == bisection_steps(0.0, width, eps) && std::abs(e.value - lambda) < eps / 2;
      detail += std::to_string(e.inertia_evals) + " ";
    }
    report("bisection step count", ok, detail);
  }

  {
    ResultRecord r;
    r.config = {{"geom", "circle"}};
    r.format = "h2";
    r.n = 3;
    r.estimates.push_back({1, 0.1 + 0.2, 1e-9, 0.3 - 1e-9, 0.3 + 1e-9, 30, 28, 2, 1.5});
    report("record round trip", record_from_json(nlohmann::json::parse(to_json(r).dump())) == r, "");
  }
  return all_ok;
}

namespace {

void add_problem_options(CLI::App* app, ProblemConfig& cfg) {
  app->add_option("--geom", cfg.geom, "circle, grid1d, grid2d or grid3d")->capture_default_str();
  app->add_option("--n", cfg.n, "number of points")->capture_default_str();
  app->add_option("--n-per-axis", cfg.n_per_axis, "grid points per axis");
  app->add_option("--leaf-size", cfg.leaf_size, "leaf cluster size")->capture_default_str();
  app->add_option("--format", cfg.format, "blr2, hss or h2")->capture_default_str();
  app->add_option("--eta", cfg.eta, "strong admissibility parameter")->capture_default_str();
  app->add_option("--eps-h2", cfg.eps_h2, "compression tolerance (default 1e-2 * eps-ev)");
  app->add_option("--eps-ev", cfg.eps_ev, "bisection tolerance")->capture_default_str();
  app->add_option("--matrix-file", cfg.matrix_file, "symmetric matrix file instead of a geometry");
  app->add_option("--points-file", cfg.points_file, "point cloud file instead of a generated geometry");
  app->add_option("--seed", cfg.seed, "random seed recorded with the results");
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank-structured symmetric eigenvalue slicing"};
  app.require_subcommand(1);

  EigConfig eig;
  int k = 0;
  std::vector<int> k_range;
  std::vector<double> interval;
  auto* eig_cmd = app.add_subcommand("eig", "selected eigenvalues by bisection");
  add_problem_options(eig_cmd, eig.problem);
  eig_cmd->add_option("--k", k, "eigenvalue index (1-based)");
  eig_cmd->add_option("--k-range", k_range, "first and last index")->expected(2);
  eig_cmd->add_option("--interval", interval, "starting interval a b")->expected(2);
  eig_cmd->add_option("--workers,-P", eig.workers, "worker threads")->capture_default_str();
  eig_cmd->add_option("--parallel", eig.parallel, "static or master")->capture_default_str();
  eig_cmd->add_option("--m", eig.m, "indices per master-worker task")->capture_default_str();
  eig_cmd->add_option("--output,-o", eig.output, "JSON result record (stdout by default)");
  eig_cmd->add_option("--csv", eig.csv, "per-eigenvalue CSV");
  eig_cmd->add_option("--task-log", eig.task_log, "JSON-lines task instrumentation");

  ProblemConfig cmp;
  cmp.geom = "grid3d";
  cmp.eps_h2 = 1e-6;
  std::vector<int> sweep;
  std::string cmp_csv;
  auto* cmp_cmd = app.add_subcommand("compare", "HSS versus H2 over a size sweep");
  add_problem_options(cmp_cmd, cmp);
  cmp_cmd->add_option("--sweep", sweep, "sizes (n per axis for 2D/3D grids)")->required()->delimiter(',');
  cmp_cmd->add_option("--csv", cmp_csv, "output CSV (stdout by default)");

  ProblemConfig icfg;
  std::vector<double> mus;
  std::string icsv;
  auto* in_cmd = app.add_subcommand("inertia", "inertia counts at given shifts");
  add_problem_options(in_cmd, icfg);
  in_cmd->add_option("--mu", mus, "shifts")->required()->delimiter(',');
  in_cmd->add_option("--csv", icsv, "output CSV (stdout by default)");

  std::string level = "quick";
  bool fault = false;
  auto* self_cmd = app.add_subcommand("selftest", "oracle-backed consistency checks");
  self_cmd->add_option("--level", level, "quick or full")->capture_default_str();
  self_cmd->add_flag("--inject-fault", fault, "flip inertia signs to exercise the failure path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*eig_cmd) {
      if (eig_cmd->count("--k")) eig.k = k;
      if (!k_range.empty()) eig.k_range = std::pair{k_range[0], k_range[1]};
      if (!interval.empty()) eig.interval = std::pair{interval[0], interval[1]};
      if (eig.k && eig.k_range) throw std::invalid_argument("--k and --k-range are mutually exclusive");
      const ResultRecord r = run_eig(eig);
      write_text(eig.output, to_json(r).dump(2) + "\n", out);
      if (!eig.csv.empty()) {
        std::ostringstream csv;
        write_estimates_csv(csv, r.estimates);
        write_text(eig.csv, csv.str(), out);
      }
    } else if (*cmp_cmd) {
      std::ostringstream csv;
      write_compare_csv(csv, run_compare(cmp, sweep));
      write_text(cmp_csv, csv.str(), out);
    } else if (*in_cmd) {
      std::ostringstream csv;
      write_inertia_csv(csv, run_inertia(icfg, mus));
      write_text(icsv, csv.str(), out);
    } else if (*self_cmd) {
      return run_selftest(level, fault, out) ? kOk : kNumericalError;
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

}  // namespace h2spec::cli
