#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "h2spec/compress.hpp"
#include "h2spec/spectrum.hpp"

namespace h2spec {

struct TaskRecord {
  int worker = 0;
  int task = 0;
  int k_lo = 0;
  int k_hi = 0;
  int inertia_evals = 0;
  double busy_ms = 0.0;
  double idle_ms = 0.0;
};

struct WorkerStats {
  int worker = 0;
  int tasks = 0;
  int inertia_evals = 0;
  double busy_ms = 0.0;
  double idle_ms = 0.0;
};

struct ParallelRun {
  std::vector<EigenvalueEstimate> estimates;  // sorted by k
  std::vector<WorkerStats> workers;
  std::vector<TaskRecord> tasks;
  double wall_ms = 0.0;
};

// P workers, each with its own copy of H and its own cache, solve contiguous
// chunks of k0..k1.
ParallelRun static_partition_solve(const RankStructuredMatrix& H, int k0, int k1, double a, double b,
                                   double eps, int P);

// Coordinator on the calling thread hands out index intervals to P workers.
// Tasks with at most 2m indices are solved whole; larger ones have their m
// centered indices solved and the two flanking ranges returned as new tasks.
ParallelRun master_worker_solve(const RankStructuredMatrix& H, int k0, int k1, double a, double b,
                                double eps, int P, int m = 4);

struct EfficiencyRow {
  int worker = 0;
  double busy_ms = 0.0;
  double idle_ms = 0.0;
  double efficiency = 0.0;  // busy / (busy + idle)
};

struct EfficiencyReport {
  std::vector<EfficiencyRow> rows;
  double overall = 0.0;  // total busy / (workers * wall)
};

EfficiencyReport efficiency_report(const ParallelRun& run);

// One JSON object per task: {worker, task, inertia_evals, busy_ms, idle_ms}.
void write_task_log(std::ostream& out, const ParallelRun& run);

}  // namespace h2spec
