#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dhrn {

// Static-partition fork/join pool. Work items must be element-independent:
// every output element is produced by one sequential loop, so results are
// bit-identical for any thread count. One chunk per thread; the caller runs
// chunk 0 and blocks until all participating workers finish, so the job
// closure outlives every reader.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  int threads() const { return static_cast<int>(workers_.size()) + 1; }

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t parts = std::min<std::size_t>(n, static_cast<std::size_t>(threads()));
    if (parts == 1) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      job_fn_ = &fn;
      job_n_ = n;
      job_parts_ = parts;
      pending_.store(static_cast<int>(parts) - 1, std::memory_order_release);
      ++generation_;
    }
    cv_.notify_all();
    run_part(0, n, parts, fn);
    std::unique_lock<std::mutex> lock(mutex_);
    done_cv_.wait(lock, [&] { return pending_.load(std::memory_order_acquire) <= 0; });
    job_fn_ = nullptr;
  }

 private:
  ThreadPool() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("DHRN_THREADS")) {
      long v = std::strtol(env, nullptr, 10);
      if (v >= 1 && v <= 256) hw = static_cast<unsigned>(v);
    }
    for (unsigned i = 1; i < hw; ++i) {
      workers_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  static void run_part(std::size_t part, std::size_t n, std::size_t parts,
                       const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t chunk = (n + parts - 1) / parts;
    const std::size_t lo = part * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo < hi) fn(lo, hi);
  }

  void worker_loop(std::size_t id) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
      std::size_t n = 0, parts = 0;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = job_fn_;
        n = job_n_;
        parts = job_parts_;
      }
      if (!fn || id >= parts) continue;
      run_part(id, n, parts, *fn);
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lock(mutex_);
        done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t job_parts_ = 0;
  std::atomic<int> pending_{0};
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  ThreadPool::instance().run(n, fn);
}

}  // namespace dhrn
