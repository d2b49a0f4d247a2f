#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stressorlens/matrix_io.hpp"

namespace stressorlens::app {

using SnapshotId = std::uint64_t;

struct SnapshotInfo {
  SnapshotId id = 0;
  std::optional<SnapshotId> parent;
  std::string timestamp;  // RFC 3339, UTC
  std::string config_hash;
  std::string stage;
  std::map<std::string, std::string> sha256;  // file name -> digest

  nlohmann::ordered_json to_json() const;
  static SnapshotInfo from_json(const nlohmann::json& j);
};

struct Snapshot {
  SnapshotInfo info;
  FileSet files;
};

// Immutable numbered snapshots under <run_dir>/snapshots/NNNNNN. A snapshot becomes
// visible only when its directory is renamed into place, so readers never see a
// partial write.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::filesystem::path run_dir);

  const std::filesystem::path& run_dir() const noexcept { return run_dir_; }

  std::vector<SnapshotId> list() const;  // increasing
  std::optional<SnapshotId> latest() const;
  SnapshotInfo info(SnapshotId id) const;
  // Verifies every file against the manifest; throws IntegrityError on mismatch and
  // Error if the snapshot does not exist.
  Snapshot read(SnapshotId id) const;

  SnapshotId write(const FileSet& files, std::optional<SnapshotId> parent, const std::string& stage,
                   const std::string& config_hash);

  // Called after the temporary directory is complete and before it is renamed. Tests
  // throw from here to simulate a crash.
  std::function<void(const std::filesystem::path& temp_dir)> before_publish;

 private:
  std::filesystem::path dir_for(SnapshotId id) const;

  std::filesystem::path run_dir_;
  std::filesystem::path snapshots_;
  mutable std::mutex write_mutex_;
};

}  // namespace stressorlens::app
