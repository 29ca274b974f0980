#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace stokesmf {

// Persistent pool dispatching contiguous index ranges.  Results are thread
// count independent by construction: parallel_for hands each worker a
// disjoint [begin, end) slice and callers write only to per-index slots, so
// no floating point reduction ever crosses a chunk boundary.  Not reentrant:
// do not call parallel_for from inside a task.
class ThreadPool {
 public:
  // threads <= 0 selects std::thread::hardware_concurrency().
  explicit ThreadPool(int threads = 0) {
    int n = threads;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    size_ = n;
    if (size_ == 1) return;
    workers_.reserve(size_);
    for (int i = 0; i < size_; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    if (workers_.empty()) return;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return size_; }

  // Invokes fn(begin, end) over disjoint ranges covering [0, n).
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (workers_.empty() || n < 2 * static_cast<std::size_t>(size_)) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      job_ = &fn;
      job_n_ = n;
      next_chunk_.store(0, std::memory_order_relaxed);
      pending_ = size_;
      ++generation_;
    }
    start_cv_.notify_all();
    std::unique_lock<std::mutex> lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void worker_loop() {
    std::uint64_t seen = 0;
    while (true) {
      const std::function<void(std::size_t, std::size_t)>* job = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        n = job_n_;
      }
      const std::size_t chunks = static_cast<std::size_t>(size_);
      while (true) {
        const std::size_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
        if (c >= chunks) break;
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        if (begin < end) (*job)(begin, end);
      }
      {
        std::lock_guard<std::mutex> lock(mutex_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int size_ = 1;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  std::atomic<std::size_t> next_chunk_{0};
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace stokesmf
