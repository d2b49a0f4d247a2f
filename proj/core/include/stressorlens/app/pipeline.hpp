#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stressorlens/app/artifacts.hpp"
#include "stressorlens/app/config.hpp"
#include "stressorlens/app/snapshot_store.hpp"

namespace stressorlens::app {

using Summary = std::vector<std::pair<std::string, std::string>>;
std::string format_summary(const Summary& s);  // "key=value key=value"

struct StageOutput {
  Stage stage = Stage::Ingest;
  FileSet files;
  Summary summary;
  std::vector<std::string> warnings;
};

// Analyst feature edits kept in <run_dir>/curation.json until the next retrain.
struct FeatureCuration {
  std::vector<std::string> include;
  std::set<std::string> exclude;
  bool operator==(const FeatureCuration&) const = default;
};
std::optional<FeatureCuration> read_curation(const fs::path& run_dir);
void write_curation(const fs::path& run_dir, const FeatureCuration& c);
// Configured features with include/exclude replaced by the curation, when present.
textprep::FeatureConfig effective_features(const PipelineConfig& config,
                                           const std::optional<FeatureCuration>& curation);

StageOutput run_ingest(const PipelineConfig& config);
StageOutput run_train(const PipelineConfig& config, const FileSet& parent,
                      const textprep::FeatureConfig& features);
StageOutput run_impute(const PipelineConfig& config, const FileSet& parent);
StageOutput run_subset(const PipelineConfig& config, const FileSet& parent);
StageOutput run_lexicon_label(const PipelineConfig& config, const FileSet& parent);
StageOutput run_trends(const PipelineConfig& config, const FileSet& parent);

// Applies `stage` to `parent` and returns the child file set.
FileSet apply_stage(const FileSet& parent, const StageOutput& out);

// True when the files hold everything the trends stage reads.
bool trends_ready(const FileSet& files);

// Train outputs laid over `base`. The topic-group map of `base` survives when the
// topic count is unchanged; topic names do not. Trends are recomputed when possible.
FileSet publish_retrain(const PipelineConfig& config, const FileSet& base, const StageOutput& train);

// Curation edits on the current LDA model.
FileSet with_topic_name(const PipelineConfig& config, const FileSet& files, std::size_t topic,
                        std::optional<std::string> name);
FileSet with_group_map(const PipelineConfig& config, const FileSet& files,
                       const topicmodel::TopicGroupMap& groups);

// Runs one stage against the store: reads `from` (default: latest), writes a child.
struct StageRun {
  SnapshotId snapshot = 0;
  StageOutput output;
};
StageRun run_stage(SnapshotStore& store, const PipelineConfig& config, Stage stage,
                   std::optional<SnapshotId> from = std::nullopt);

}  // namespace stressorlens::app
