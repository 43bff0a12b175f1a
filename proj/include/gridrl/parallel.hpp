#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gridrl {

// Fixed pool of worker threads driving index-parallel loops. Each index is
// processed exactly once; workers pull indices from a shared atomic cursor.
// Because tasks write only to their own index's slot, results are identical
// for any worker count.
class WorkerPool {
 public:
  explicit WorkerPool(int workers) : target_workers_(workers < 1 ? 1 : workers) {
    for (int i = 1; i < target_workers_; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::unique_lock lock(mutex_);
      shutdown_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int workers() const { return target_workers_; }

  // Runs fn(i) for i in [0, n). Blocks until all indices are done. The
  // calling thread participates, so a 1-worker pool is a plain loop.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (target_workers_ == 1 || n == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::unique_lock lock(mutex_);
      job_fn_ = &fn;
      job_size_ = n;
      job_cursor_ = 0;
      job_remaining_ = n;
      ++job_generation_;
    }
    cv_.notify_all();
    run_indices();
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return job_remaining_ == 0; });
    job_fn_ = nullptr;
  }

 private:
  void run_indices() {
    while (true) {
      std::size_t i;
      const std::function<void(std::size_t)>* fn;
      {
        std::unique_lock lock(mutex_);
        if (job_fn_ == nullptr || job_cursor_ >= job_size_) return;
        i = job_cursor_++;
        fn = job_fn_;
      }
      (*fn)(i);
      {
        std::unique_lock lock(mutex_);
        if (--job_remaining_ == 0) done_cv_.notify_all();
      }
    }
  }

  void worker_loop() {
    std::uint64_t seen_generation = 0;
    while (true) {
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] {
          return shutdown_ || (job_fn_ != nullptr && job_generation_ != seen_generation);
        });
        if (shutdown_) return;
        seen_generation = job_generation_;
      }
      run_indices();
    }
  }

  int target_workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_fn_ = nullptr;
  std::size_t job_size_ = 0;
  std::size_t job_cursor_ = 0;
  std::size_t job_remaining_ = 0;
  std::uint64_t job_generation_ = 0;
  bool shutdown_ = false;
};

}  // namespace gridrl
