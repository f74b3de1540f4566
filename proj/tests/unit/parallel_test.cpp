#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "h2spec/errors.hpp"
#include "h2spec/parallel.hpp"
#include "test_support.hpp"

using namespace h2spec;
using h2spec::test::build;

namespace {

const RankStructuredMatrix& circle256() {
  static const RankStructuredMatrix H = build(generate_circle(256), Format::HSS, 1e-8, 32);
  return H;
}

}  // namespace

TEST(StaticPartition, SingleWorkerMatchesSequential) {
  const auto& H = circle256();
  const ParallelRun run = static_partition_solve(H, 100, 115, 0, 2048, 1e-6, 1);
  const auto seq = slice_range(H, 100, 115, 0, 2048, 1e-6);
  ASSERT_EQ(run.estimates.size(), seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(run.estimates[i].k, seq[i].k);
    EXPECT_EQ(run.estimates[i].value, seq[i].value);
  }
  EXPECT_EQ(efficiency_report(run).overall, 1.0);
}

TEST(StaticPartition, ValuesInvariantInWorkerCount) {
  const auto& H = circle256();
  const ParallelRun base = static_partition_solve(H, 121, 136, 0, 2048, 1e-6, 1);
  for (int P : {2, 4, 16}) {
    const ParallelRun run = static_partition_solve(H, 121, 136, 0, 2048, 1e-6, P);
    ASSERT_EQ(run.estimates.size(), 16u);
    EXPECT_EQ(run.workers.size(), static_cast<std::size_t>(P));
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_EQ(run.estimates[i].k, 121 + static_cast<int>(i));
      EXPECT_LE(std::abs(run.estimates[i].value - base.estimates[i].value), 1e-15);
    }
  }
}

TEST(StaticPartition, ChunkSizesDifferByAtMostOne) {
  const auto& H = circle256();
  const ParallelRun run = static_partition_solve(H, 1, 10, 0, 2048, 1e-4, 3);
  std::vector<int> sizes;
  for (const auto& t : run.tasks) sizes.push_back(t.k_hi - t.k_lo + 1);
  ASSERT_EQ(sizes.size(), 3u);
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
  EXPECT_THROW(static_partition_solve(H, 1, 10, 0, 2048, 1e-4, 0), std::invalid_argument);
  EXPECT_THROW(static_partition_solve(H, 0, 10, 0, 2048, 1e-4, 2), std::invalid_argument);
}

TEST(StaticPartition, WorkerErrorsPropagate) {
  const auto& H = circle256();
  EXPECT_THROW(static_partition_solve(H, 1, 256, 1e5, 1e5 + 1, 1e-4, 2), NotInInterval);
}

TEST(MasterWorker, ResolvesEveryIndexOnce) {
  const auto& H = circle256();
  const double eps = 1e-6;
  const ParallelRun mw = master_worker_solve(H, 1, 256, 0, 2048, eps, 4, 8);
  const ParallelRun st = static_partition_solve(H, 1, 256, 0, 2048, eps, 4);
  ASSERT_EQ(mw.estimates.size(), 256u);
  std::set<int> seen;
  for (std::size_t i = 0; i < 256; ++i) {
    EXPECT_TRUE(seen.insert(mw.estimates[i].k).second);
    EXPECT_EQ(mw.estimates[i].k, static_cast<int>(i) + 1);
    EXPECT_LE(std::abs(mw.estimates[i].value - st.estimates[i].value), 2 * eps);
  }
  EXPECT_GT(mw.tasks.size(), 1u);
}

TEST(MasterWorker, SmallRangeIsSingleTask) {
  const auto& H = circle256();
  const ParallelRun run = master_worker_solve(H, 40, 47, 0, 2048, 1e-6, 3, 4);
  EXPECT_EQ(run.tasks.size(), 1u);
  EXPECT_EQ(run.estimates.size(), 8u);
}

TEST(MasterWorker, RejectsBadArguments) {
  const auto& H = circle256();
  EXPECT_THROW(master_worker_solve(H, 1, 10, 0, 2048, 1e-6, 1), std::invalid_argument);
  EXPECT_THROW(master_worker_solve(H, 1, 10, 0, 2048, 1e-6, 2, 0), std::invalid_argument);
}

TEST(MasterWorker, FailureListsUnresolvedIndices) {
  const auto& H = circle256();
  try {
    master_worker_solve(H, 1, 6, 1e5, 1e5 + 1, 1e-6, 2, 4);
    FAIL() << "expected IncompleteSpectrum";
  } catch (const IncompleteSpectrum& e) {
    EXPECT_EQ(e.unresolved(), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  }
}

TEST(Efficiency, ReportBoundsAndTaskLog) {
  const auto& H = circle256();
  const ParallelRun run = master_worker_solve(H, 1, 64, 0, 2048, 1e-5, 2, 4);
  const EfficiencyReport rep = efficiency_report(run);
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& r : rep.rows) {
    EXPECT_GE(r.efficiency, 0.0);
    EXPECT_LE(r.efficiency, 1.0);
  }
  EXPECT_GE(rep.overall, 0.0);
  EXPECT_LE(rep.overall, 1.0);
  int evals = 0;
  for (const auto& w : run.workers) evals += w.inertia_evals;
  int task_evals = 0;
  for (const auto& t : run.tasks) task_evals += t.inertia_evals;
  EXPECT_EQ(evals, task_evals);
  std::ostringstream out;
  write_task_log(out, run);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    for (const char* key : {"\"worker\":", "\"task\":", "\"inertia_evals\":", "\"busy_ms\":", "\"idle_ms\":"})
      EXPECT_NE(line.find(key), std::string::npos);
  }
  EXPECT_EQ(lines, run.tasks.size());
}
