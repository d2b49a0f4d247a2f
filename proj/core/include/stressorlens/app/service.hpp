#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "json.hpp"
#include "stressorlens/app/config.hpp"
#include "stressorlens/app/pipeline.hpp"
#include "stressorlens/app/snapshot_store.hpp"

namespace httplib {
class Server;
}

namespace stressorlens::app {

struct ApiResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobState s);

struct JobStatus {
  std::uint64_t id = 0;
  JobState state = JobState::Queued;
  std::string started;   // RFC 3339, empty until running
  std::string finished;
  std::optional<SnapshotId> base;      // snapshot the job started from
  std::optional<SnapshotId> snapshot;  // published result
  std::string error;
};

// Everything the API reads from one snapshot, parsed once.
struct RunState;

class Service {
 public:
  explicit Service(PipelineConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(std::string_view method, std::string_view path,
                     const std::map<std::string, std::string>& query, std::string_view body);

  // Serves on a background thread. Port 0 binds a free port; the bound port is returned.
  int start(const std::string& host, int port);
  // Blocks in the calling thread.
  void listen(const std::string& host, int port);
  void stop();

  void wait_for_jobs();
  std::optional<JobStatus> job(std::uint64_t id) const;

  SnapshotStore& store() noexcept { return store_; }

  // Runs inside the retrain thread before training starts.
  std::function<void()> retrain_gate;

 private:
  std::shared_ptr<const RunState> current();
  std::shared_ptr<const RunState> publish(SnapshotId id);
  SnapshotId commit(const FileSet& files, SnapshotId parent, const std::string& stage);

  ApiResponse get_snapshot(const RunState& s);
  ApiResponse get_topics(const RunState& s);
  ApiResponse get_samples(const RunState& s, std::size_t topic, const std::map<std::string, std::string>& query);
  ApiResponse post_topic_name(std::size_t topic, const nlohmann::json& body);
  ApiResponse post_groups(const nlohmann::json& body);
  ApiResponse get_features(const RunState& s);
  ApiResponse post_features(const RunState& s, const nlohmann::json& body);
  ApiResponse post_retrain();
  ApiResponse get_job(std::uint64_t id);
  ApiResponse get_trends(const RunState& s, const std::map<std::string, std::string>& query);
  ApiResponse get_external(const RunState& s);
  ApiResponse get_correlations(const RunState& s);
  ApiResponse get_post(const RunState& s, const std::string& id);
  ApiResponse get_dashboard(const RunState& s);

  void run_retrain(std::uint64_t job_id, SnapshotId base);

  PipelineConfig config_;
  SnapshotStore store_;

  mutable std::mutex state_mutex_;
  std::shared_ptr<const RunState> state_;
  std::mutex write_mutex_;     // serializes read-modify-write of the latest snapshot
  std::mutex curation_mutex_;

  mutable std::mutex jobs_mutex_;
  std::map<std::uint64_t, JobStatus> jobs_;
  std::uint64_t next_job_ = 1;
  bool job_active_ = false;  // a job is queued or running
  std::jthread worker_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
};

}  // namespace stressorlens::app
