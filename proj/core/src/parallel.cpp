#include "h2spec/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "h2spec/errors.hpp"

namespace h2spec {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

template <class T>
class Channel {
 public:
  void send(T v) {
    {
      std::lock_guard lock(m_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }
  T receive() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty(); });
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
};

int evals_of(const std::vector<EigenvalueEstimate>& v) {
  int e = 0;
  for (const auto& x : v) e += x.inertia_evals + x.bracket_evals;
  return e;
}

void check_range(const RankStructuredMatrix& H, int k0, int k1, int P) {
  if (k0 < 1 || k1 > H.n() || k0 > k1) throw std::invalid_argument("parallel solve: bad index range");
  if (P < 1) throw std::invalid_argument("parallel solve: need at least one worker");
}

}  // namespace

ParallelRun static_partition_solve(const RankStructuredMatrix& H, int k0, int k1, double a, double b,
                                   double eps, int P) {
  check_range(H, k0, k1, P);
  const int count = k1 - k0 + 1;
  P = std::min(P, count);
  ParallelRun run;
  run.workers.resize(P);
  run.tasks.resize(P);
  std::vector<std::vector<EigenvalueEstimate>> parts(P);
  std::vector<std::exception_ptr> errors(P);
  const auto t0 = Clock::now();
  std::vector<std::thread> threads;
  for (int w = 0; w < P; ++w) {
    const int lo = k0 + static_cast<int>(static_cast<long long>(count) * w / P);
    const int hi = k0 + static_cast<int>(static_cast<long long>(count) * (w + 1) / P) - 1;
    threads.emplace_back([&, w, lo, hi] {
      const auto start = Clock::now();
      try {
        const RankStructuredMatrix replica = H;
        InertiaCache cache;
        parts[w] = slice_range(replica, lo, hi, a, b, eps, &cache);
      } catch (...) {
        errors[w] = std::current_exception();
      }
      const double busy = ms_since(start);
      run.workers[w] = {w, 1, evals_of(parts[w]), busy, 0.0};
      run.tasks[w] = {w, w, lo, hi, evals_of(parts[w]), busy, 0.0};
    });
  }
  for (auto& t : threads) t.join();
  run.wall_ms = ms_since(t0);
  for (auto& ws : run.workers) ws.idle_ms = std::max(0.0, run.wall_ms - ws.busy_ms);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (auto& p : parts) run.estimates.insert(run.estimates.end(), p.begin(), p.end());
  std::sort(run.estimates.begin(), run.estimates.end(), [](auto& x, auto& y) { return x.k < y.k; });
  return run;
}

namespace {

struct Task {
  int id = 0;
  int k_lo = 0;
  int k_hi = 0;
  double a = 0.0;
  double b = 0.0;
};

struct Message {
  enum class Kind { Split, Done, Failed } kind = Kind::Done;
  int worker = 0;
  int task = 0;
  std::vector<Task> subtasks;  // Split
  std::vector<EigenvalueEstimate> results;
  TaskRecord record;
  std::string error;
};

}  // namespace

ParallelRun master_worker_solve(const RankStructuredMatrix& H, int k0, int k1, double a, double b,
                                double eps, int P, int m) {
  check_range(H, k0, k1, P);
  if (P < 2) throw std::invalid_argument("master_worker_solve: need at least two workers");
  if (m < 1) throw std::invalid_argument("master_worker_solve: m must be positive");

  ParallelRun run;
  run.workers.resize(P);
  for (int w = 0; w < P; ++w) run.workers[w].worker = w;
  std::vector<Channel<std::optional<Task>>> inbox(P);
  Channel<Message> outbox;
  const auto t0 = Clock::now();

  auto worker = [&](int w) {
    const RankStructuredMatrix replica = H;
    auto idle_since = Clock::now();
    for (;;) {
      std::optional<Task> task = inbox[w].receive();
      if (!task) return;
      const double idle = ms_since(idle_since);
      const auto start = Clock::now();
      Message done;
      done.worker = w;
      done.task = task->id;
      try {
        InertiaCache cache;
        const int count = task->k_hi - task->k_lo + 1;
        if (count <= 2 * m) {
          done.results = slice_range(replica, task->k_lo, task->k_hi, task->a, task->b, eps, &cache);
        } else {
          const int s = task->k_lo + (count - m) / 2;
          const int e = s + m - 1;
          const auto first = slice_spectrum(replica, s, task->a, task->b, eps, &cache);
          const auto last = slice_spectrum(replica, e, task->a, task->b, eps, &cache);
          Message split;
          split.kind = Message::Kind::Split;
          split.worker = w;
          split.task = task->id;
          split.subtasks.push_back({0, task->k_lo, s - 1, task->a, first.upper});
          split.subtasks.push_back({0, e + 1, task->k_hi, last.lower, task->b});
          outbox.send(std::move(split));
          done.results = {first, last};
          SliceOptions inner;
          inner.validate_bracket = false;
          for (int k = s + 1; k < e; ++k)
            done.results.push_back(slice_spectrum(replica, k, first.lower, last.upper, eps, &cache, inner));
        }
        done.kind = Message::Kind::Done;
      } catch (const std::exception& ex) {
        done.kind = Message::Kind::Failed;
        done.error = ex.what();
      }
      done.record = {w, task->id, task->k_lo, task->k_hi, evals_of(done.results), ms_since(start), idle};
      idle_since = Clock::now();
      outbox.send(std::move(done));
    }
  };

  std::vector<std::thread> threads;
  for (int w = 0; w < P; ++w) threads.emplace_back(worker, w);

  std::deque<Task> free_list;
  int next_id = 0;
  free_list.push_back({next_id++, k0, k1, a, b});
  std::deque<int> idle;
  for (int w = 0; w < P; ++w) idle.push_back(w);
  std::vector<Task> active(P);
  std::vector<char> resolved(k1 - k0 + 1, 0);
  std::vector<std::string> failures;
  int outstanding = 0;

  for (;;) {
    while (!free_list.empty() && !idle.empty()) {
      Task t = free_list.front();
      free_list.pop_front();
      const int w = idle.front();
      idle.pop_front();
      active[w] = t;
      ++outstanding;
      inbox[w].send(t);
    }
    if (outstanding == 0) break;
    Message msg = outbox.receive();
    if (msg.kind == Message::Kind::Split) {
      for (auto& t : msg.subtasks) {
        t.id = next_id++;
        free_list.push_back(t);
      }
      continue;
    }
    --outstanding;
    idle.push_back(msg.worker);
    run.tasks.push_back(msg.record);
    auto& ws = run.workers[msg.worker];
    ++ws.tasks;
    ws.inertia_evals += msg.record.inertia_evals;
    ws.busy_ms += msg.record.busy_ms;
    ws.idle_ms += msg.record.idle_ms;
    if (msg.kind == Message::Kind::Failed) {
      failures.push_back(msg.error);
      continue;
    }
    for (auto& r : msg.results) {
      resolved[r.k - k0] = 1;
      run.estimates.push_back(r);
    }
  }
  for (int w = 0; w < P; ++w) inbox[w].send(std::nullopt);
  for (auto& t : threads) t.join();
  run.wall_ms = ms_since(t0);

  std::vector<int> unresolved;
  for (int k = k0; k <= k1; ++k)
    if (!resolved[k - k0]) unresolved.push_back(k);
  if (!unresolved.empty()) {
    std::string what = "master_worker_solve: " + std::to_string(unresolved.size()) + " indices unresolved";
    if (!failures.empty()) what += " (" + failures.front() + ")";
    throw IncompleteSpectrum(what, std::move(unresolved));
  }
  std::sort(run.estimates.begin(), run.estimates.end(), [](auto& x, auto& y) { return x.k < y.k; });
  return run;
}

EfficiencyReport efficiency_report(const ParallelRun& run) {
  EfficiencyReport rep;
  double busy = 0.0;
  for (const auto& w : run.workers) {
    const double total = w.busy_ms + w.idle_ms;
    rep.rows.push_back({w.worker, w.busy_ms, w.idle_ms, total > 0 ? w.busy_ms / total : 1.0});
    busy += w.busy_ms;
  }
  const double denom = run.wall_ms * static_cast<double>(run.workers.size());
  rep.overall = run.workers.size() <= 1 ? 1.0 : (denom > 0 ? std::min(1.0, busy / denom) : 1.0);
  return rep;
}

void write_task_log(std::ostream& out, const ParallelRun& run) {
  for (const auto& t : run.tasks)
    out << "{\"worker\":" << t.worker << ",\"task\":" << t.task << ",\"k_lo\":" << t.k_lo
        << ",\"k_hi\":" << t.k_hi << ",\"inertia_evals\":" << t.inertia_evals << ",\"busy_ms\":" << t.busy_ms
        << ",\"idle_ms\":" << t.idle_ms << "}\n";
}

}  // namespace h2spec
