#pragma once

// Bounded FIFO job queue drained by a fixed pool of worker threads.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "volseg/error.hpp"

namespace volseg::service {

enum class JobKind { kSegment, kEvaluate, kStudy };
enum class JobState { kQueued, kRunning, kDone, kError };

inline const char* job_kind_name(JobKind k) {
  switch (k) {
    case JobKind::kSegment: return "segment";
    case JobKind::kEvaluate: return "evaluate";
    case JobKind::kStudy: return "study";
  }
  return "?";
}

inline const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kError: return "error";
  }
  return "?";
}

inline bool legal_transition(JobState from, JobState to) {
  return (from == JobState::kQueued && to == JobState::kRunning) ||
         (from == JobState::kRunning && (to == JobState::kDone || to == JobState::kError));
}

struct JobRecord {
  std::string job_id;
  JobKind kind = JobKind::kSegment;
  JobState state = JobState::kQueued;
  nlohmann::json inputs;
  nlohmann::json result;  // null until done
  std::string error;

  nlohmann::json to_json() const {
    nlohmann::json j{{"job_id", job_id},
                     {"kind", job_kind_name(kind)},
                     {"state", job_state_name(state)},
                     {"inputs", inputs},
                     {"result", result}};
    j["error"] = error.empty() ? nlohmann::json(nullptr) : nlohmann::json(error);
    return j;
  }
};

class QueueFull : public Error {
 public:
  explicit QueueFull(const std::string& d) : Error(ErrorKind::kInvalidArgument, d) {}
};

class JobQueue {
 public:
  /// The task returns the job result or throws; the message of anything it
  /// throws becomes the job's error.
  using Task = std::function<nlohmann::json()>;

  explicit JobQueue(std::size_t workers = 1, std::size_t capacity = 64) : capacity_(capacity) {
    if (workers == 0) throw InvalidArgument("job queue needs at least one worker");
    for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { run(); });
  }

  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  ~JobQueue() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  JobRecord submit(JobKind kind, nlohmann::json inputs, Task task) {
    std::lock_guard lock(mu_);
    if (pending_.size() >= capacity_) throw QueueFull("job queue is full (" + std::to_string(capacity_) + " pending)");
    JobRecord rec;
    rec.job_id = "job-" + std::to_string(++next_id_);
    rec.kind = kind;
    rec.inputs = std::move(inputs);
    records_[rec.job_id] = rec;
    pending_.push_back({rec.job_id, std::move(task)});
    cv_.notify_one();
    return rec;
  }

  std::optional<JobRecord> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  /// Blocks until no job is queued or running.
  void wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return pending_.empty() && running_ == 0; });
  }

  /// Job ids in the order they finished (done or error).
  std::vector<std::string> completion_order() const {
    std::lock_guard lock(mu_);
    return finished_;
  }

 private:
  struct Pending {
    std::string id;
    Task task;
  };

  void transition(const std::string& id, JobState to) {
    JobRecord& r = records_.at(id);
    if (!legal_transition(r.state, to)) {
      throw InvalidArgument(std::string("illegal job transition ") + job_state_name(r.state) + " -> " +
                            job_state_name(to));
    }
    r.state = to;
  }

  void run() {
    for (;;) {
      Pending job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
        if (pending_.empty()) return;
        job = std::move(pending_.front());
        pending_.pop_front();
        ++running_;
        transition(job.id, JobState::kRunning);
      }
      nlohmann::json result;
      std::string error;
      try {
        result = job.task();
      } catch (const std::exception& e) {
        error = e.what();
        if (error.empty()) error = "job failed";
      } catch (...) {
        error = "job failed";
      }
      {
        std::lock_guard lock(mu_);
        JobRecord& r = records_.at(job.id);
        if (error.empty()) {
          r.result = std::move(result);
          transition(job.id, JobState::kDone);
        } else {
          r.error = std::move(error);
          transition(job.id, JobState::kError);
        }
        finished_.push_back(job.id);
        --running_;
      }
      idle_cv_.notify_all();
    }
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<Pending> pending_;
  std::map<std::string, JobRecord> records_;
  std::vector<std::string> finished_;
  std::vector<std::thread> threads_;
  std::size_t capacity_;
  std::size_t running_ = 0;
  std::uint64_t next_id_ = 0;
  bool stopping_ = false;
};

}  // namespace volseg::service
