#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stressorlens/flairclf.hpp"
#include "stressorlens/textprep.hpp"
#include "stressorlens/topicmodel.hpp"
#include "stressorlens/trends.hpp"

namespace stressorlens::app {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path corpus_path;
  fs::path run_dir = "run";
  fs::path stopwords_path;  // empty: no stopword removal
  textprep::FeatureConfig features;
  topicmodel::LdaConfig lda;
  flairclf::TrainConfig classifier;
  double holdout = 0.0;  // fraction of labelled posts held out for an accuracy report
  fs::path lexicon_path;  // empty: built-in stressor lexicon
  fs::path external_csv_path;  // empty: no external overlay
  std::vector<std::string> locations;
  std::string host = "127.0.0.1";
  int port = 8080;

  void validate() const;  // throws Error
  // Everything that influences pipeline outputs; host and port are left out.
  nlohmann::ordered_json analysis_json() const;
  std::string hash() const;
};

struct ConfigKey {
  std::string_view section;
  std::string_view name;
  std::string_view help;
};
const std::vector<ConfigKey>& config_keys();

// Key/value pairs from STRESSORLENS_<KEY> variables. Variables that do not name a
// key are ignored.
std::map<std::string, std::string> environment_overrides(const char* const* envp);

// File values, then environment, then flags; later sources win. Relative paths in the
// file resolve against the file's directory, others against the working directory.
PipelineConfig load_config(const std::optional<fs::path>& file,
                           const std::map<std::string, std::string>& env,
                           const std::map<std::string, std::string>& flags);

std::vector<std::string> split_list(std::string_view value);

}  // namespace stressorlens::app
