#include "stressorlens/app/snapshot_store.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <unistd.h>

#include "stressorlens/error.hpp"
#include "stressorlens/hashing.hpp"
#include "stressorlens/month.hpp"

namespace stressorlens::app {
namespace {

constexpr const char* kManifest = "MANIFEST.json";

std::optional<SnapshotId> parse_id(const std::string& name) {
  if (name.size() != 6) return std::nullopt;
  SnapshotId id = 0;
  for (char c : name) {
    if (c < '0' || c > '9') return std::nullopt;
    id = id * 10 + static_cast<SnapshotId>(c - '0');
  }
  return id;
}

bool valid_file_name(const std::string& name) {
  return !name.empty() && name != kManifest && name.find('/') == std::string::npos &&
         name.find('\\') == std::string::npos && name != "." && name != ".." && name.front() != '.';
}

std::string now_rfc3339() {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
  return format_rfc3339(secs);
}

}  // namespace

nlohmann::ordered_json SnapshotInfo::to_json() const {
  nlohmann::ordered_json j;
  j["snapshot_id"] = id;
  j["parent"] = parent ? nlohmann::ordered_json(*parent) : nlohmann::ordered_json();
  j["timestamp"] = timestamp;
  j["config_hash"] = config_hash;
  j["stage"] = stage;
  j["files"] = sha256;
  return j;
}

SnapshotInfo SnapshotInfo::from_json(const nlohmann::json& j) {
  SnapshotInfo s;
  s.id = j.at("snapshot_id").get<SnapshotId>();
  if (!j.at("parent").is_null()) s.parent = j.at("parent").get<SnapshotId>();
  s.timestamp = j.at("timestamp").get<std::string>();
  s.config_hash = j.at("config_hash").get<std::string>();
  s.stage = j.at("stage").get<std::string>();
  s.sha256 = j.at("files").get<std::map<std::string, std::string>>();
  return s;
}

SnapshotStore::SnapshotStore(std::filesystem::path run_dir)
    : run_dir_(std::move(run_dir)), snapshots_(run_dir_ / "snapshots") {
  std::error_code ec;
  std::filesystem::create_directories(snapshots_, ec);
  if (ec) throw Error("cannot create run directory '" + snapshots_.string() + "': " + ec.message());
}

std::filesystem::path SnapshotStore::dir_for(SnapshotId id) const {
  char name[16];
  std::snprintf(name, sizeof name, "%06llu", static_cast<unsigned long long>(id));
  return snapshots_ / name;
}

std::vector<SnapshotId> SnapshotStore::list() const {
  std::vector<SnapshotId> ids;
  for (const auto& entry : std::filesystem::directory_iterator(snapshots_)) {
    if (!entry.is_directory()) continue;
    if (auto id = parse_id(entry.path().filename().string())) {
      if (std::filesystem::exists(entry.path() / kManifest)) ids.push_back(*id);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<SnapshotId> SnapshotStore::latest() const {
  const auto ids = list();
  if (ids.empty()) return std::nullopt;
  return ids.back();
}

SnapshotInfo SnapshotStore::info(SnapshotId id) const {
  const auto path = dir_for(id) / kManifest;
  if (!std::filesystem::exists(path)) throw Error("snapshot " + std::to_string(id) + " does not exist");
  try {
    return SnapshotInfo::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("snapshot " + std::to_string(id) + ": unreadable manifest: " + e.what());
  }
}

Snapshot SnapshotStore::read(SnapshotId id) const {
  Snapshot snap;
  snap.info = info(id);
  const auto dir = dir_for(id);
  for (const auto& [name, digest] : snap.info.sha256) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) {
      throw IntegrityError("snapshot " + std::to_string(id) + ": file " + name + " is missing");
    }
    std::string bytes = read_file(path);
    if (sha256_hex(bytes) != digest) {
      throw IntegrityError("snapshot " + std::to_string(id) + ": file " + name + " fails its hash check");
    }
    snap.files.emplace(name, std::move(bytes));
  }
  return snap;
}

SnapshotId SnapshotStore::write(const FileSet& files, std::optional<SnapshotId> parent,
                                const std::string& stage, const std::string& config_hash) {
  static std::atomic<unsigned> counter{0};
  std::lock_guard lock(write_mutex_);
  SnapshotInfo meta;
  meta.parent = parent;
  meta.timestamp = now_rfc3339();
  meta.config_hash = config_hash;
  meta.stage = stage;
  for (const auto& [name, bytes] : files) {
    if (!valid_file_name(name)) throw Error("snapshot: invalid artifact name '" + name + "'");
    meta.sha256[name] = sha256_hex(bytes);
  }

  const auto temp = snapshots_ / (".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(temp);
  std::filesystem::create_directories(temp);
  try {
    for (const auto& [name, bytes] : files) write_file(temp / name, bytes);
    // Another process may publish concurrently; retry with the next id.
    for (int attempt = 0; attempt < 100; ++attempt) {
      meta.id = latest().value_or(0) + 1;
      write_file(temp / kManifest, meta.to_json().dump(2) + "\n");
      if (before_publish) before_publish(temp);
      std::error_code ec;
      std::filesystem::rename(temp, dir_for(meta.id), ec);
      if (!ec) return meta.id;
      if (!std::filesystem::exists(dir_for(meta.id))) {
        throw Error("snapshot: cannot publish " + dir_for(meta.id).string() + ": " + ec.message());
      }
    }
    throw Error("snapshot: could not allocate a snapshot id");
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(temp, ec);
    throw;
  }
}

}  // namespace stressorlens::app
