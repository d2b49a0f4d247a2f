#include "stressorlens/app/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stressorlens/error.hpp"
#include "stressorlens/hashing.hpp"

namespace stressorlens::app {
namespace {

struct Value {
  std::string text;
  fs::path base;  // directory relative paths resolve against
  std::string origin;
};

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

template <class T>
T parse_number(const std::string& key, const Value& v) {
  T out{};
  const std::string s = trim(v.text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("config: " + key + " = '" + v.text + "' (" + v.origin + ") is not a valid number");
  }
  return out;
}

fs::path parse_path(const Value& v) {
  const std::string s = trim(v.text);
  if (s.empty()) return {};
  fs::path p(s);
  return p.is_absolute() ? p : (v.base / p).lexically_normal();
}

nlohmann::ordered_json path_json(const fs::path& p) { return p.empty() ? "" : p.generic_string(); }

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"corpus", "corpus_path", "JSON-lines submission export"},
      {"corpus", "run_dir", "directory holding snapshots and reports"},
      {"features", "max_features", "vocabulary size"},
      {"features", "ngram_min", "shortest n-gram"},
      {"features", "ngram_max", "longest n-gram"},
      {"features", "min_df", "minimum document frequency"},
      {"features", "stopwords_path", "stopword list, one word per line"},
      {"features", "include", "comma-separated terms always kept"},
      {"features", "exclude", "comma-separated terms never kept"},
      {"lda", "k", "number of topics"},
      {"lda", "alpha", "doc-topic prior (default 1/k)"},
      {"lda", "eta", "topic-word prior (default 1/k)"},
      {"lda", "max_iters", "variational iterations"},
      {"lda", "elbo_rel_tol", "relative ELBO change that stops training"},
      {"lda", "seed", "initialization seed"},
      {"lda", "threads", "worker threads, 0 for all cores"},
      {"classifier", "learning_rate", "gradient descent step"},
      {"classifier", "l2", "L2 penalty"},
      {"classifier", "max_epochs", "gradient descent epochs"},
      {"classifier", "tolerance", "gradient max-norm stopping threshold"},
      {"classifier", "holdout", "fraction of labelled posts held out for an accuracy report"},
      {"lexicon", "lexicon_path", "lexicon JSON (default: built-in stressor lexicon)"},
      {"trends", "external_csv_path", "OWID-style daily case/vaccination CSV"},
      {"trends", "locations", "comma-separated locations summed from the external CSV"},
      {"service", "host", "HTTP bind address"},
      {"service", "port", "HTTP port"},
  };
  return keys;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t end = std::min(value.find(',', start), value.size());
    std::string item = trim(value.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::map<std::string, std::string> environment_overrides(const char* const* envp) {
  std::map<std::string, std::string> out;
  constexpr std::string_view prefix = "STRESSORLENS_";
  for (; envp && *envp; ++envp) {
    const std::string_view entry(*envp);
    if (entry.substr(0, prefix.size()) != prefix) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(entry.substr(prefix.size(), eq - prefix.size()));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (find_key(key)) out[key] = std::string(entry.substr(eq + 1));
  }
  return out;
}

PipelineConfig load_config(const std::optional<fs::path>& file,
                           const std::map<std::string, std::string>& env,
                           const std::map<std::string, std::string>& flags) {
  std::map<std::string, Value> values;
  const fs::path cwd = fs::current_path();
  if (file) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error("config: " + std::string(e.what()));
    }
    const fs::path base = fs::absolute(*file).parent_path();
    std::set<std::string> sections;
    for (const auto& k : config_keys()) sections.emplace(k.section);
    for (const auto& [section, body] : tree) {
      if (!sections.count(section)) {
        throw Error("config: unknown section [" + section + "] in " + file->string());
      }
      for (const auto& [key, node] : body) {
        const ConfigKey* k = find_key(key);
        if (!k || k->section != section) {
          throw Error("config: unknown key '" + key + "' in section [" + section + "] of " + file->string());
        }
        values[key] = {node.get_value<std::string>(), base, file->string()};
      }
    }
  }
  for (const auto& [k, v] : env) {
    if (!find_key(k)) throw Error("config: unknown key '" + k + "'");
    values[k] = {v, cwd, "environment"};
  }
  for (const auto& [k, v] : flags) {
    if (!find_key(k)) throw Error("config: unknown key '" + k + "'");
    values[k] = {v, cwd, "command line"};
  }

  PipelineConfig c;
  c.run_dir = cwd / "run";
  for (const auto& [key, v] : values) {
    if (key == "corpus_path") c.corpus_path = parse_path(v);
    else if (key == "run_dir") c.run_dir = parse_path(v);
    else if (key == "max_features") c.features.max_features = parse_number<std::size_t>(key, v);
    else if (key == "ngram_min") c.features.ngram.min = parse_number<std::size_t>(key, v);
    else if (key == "ngram_max") c.features.ngram.max = parse_number<std::size_t>(key, v);
    else if (key == "min_df") c.features.min_df = parse_number<std::size_t>(key, v);
    else if (key == "stopwords_path") c.stopwords_path = parse_path(v);
    else if (key == "include") {
      c.features.include_tokens.clear();
      for (const auto& t : split_list(v.text)) {
        const auto n = textprep::normalize_term(t);
        if (std::find(c.features.include_tokens.begin(), c.features.include_tokens.end(), n) ==
            c.features.include_tokens.end()) {
          c.features.include_tokens.push_back(n);
        }
      }
    } else if (key == "exclude") {
      c.features.exclude_tokens.clear();
      for (const auto& t : split_list(v.text)) c.features.exclude_tokens.insert(textprep::normalize_term(t));
    }
    else if (key == "k") c.lda.num_topics = parse_number<std::size_t>(key, v);
    else if (key == "alpha") c.lda.alpha = parse_number<double>(key, v);
    else if (key == "eta") c.lda.eta = parse_number<double>(key, v);
    else if (key == "max_iters") c.lda.max_iters = parse_number<std::size_t>(key, v);
    else if (key == "elbo_rel_tol") c.lda.elbo_rel_tol = parse_number<double>(key, v);
    else if (key == "seed") {
      c.lda.seed = parse_number<std::uint64_t>(key, v);
      c.classifier.seed = c.lda.seed;
    }
    else if (key == "threads") c.lda.num_threads = parse_number<std::size_t>(key, v);
    else if (key == "learning_rate") c.classifier.learning_rate = parse_number<double>(key, v);
    else if (key == "l2") c.classifier.l2 = parse_number<double>(key, v);
    else if (key == "max_epochs") c.classifier.max_epochs = parse_number<std::size_t>(key, v);
    else if (key == "tolerance") c.classifier.tolerance = parse_number<double>(key, v);
    else if (key == "holdout") c.holdout = parse_number<double>(key, v);
    else if (key == "lexicon_path") c.lexicon_path = parse_path(v);
    else if (key == "external_csv_path") c.external_csv_path = parse_path(v);
    else if (key == "locations") c.locations = split_list(v.text);
    else if (key == "host") c.host = trim(v.text);
    else if (key == "port") c.port = parse_number<int>(key, v);
  }
  if (c.locations.empty()) c.locations = trends::default_locations();
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  try {
    features.validate();
    lda.validate();
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("config: ") + e.what());
  }
  if (!(classifier.learning_rate > 0.0)) throw Error("config: learning_rate must be > 0");
  if (!(classifier.l2 >= 0.0)) throw Error("config: l2 must be >= 0");
  if (!(holdout >= 0.0 && holdout < 1.0)) throw Error("config: holdout must be in [0, 1)");
  if (port < 0 || port > 65535) throw Error("config: port must be in 0..65535");
  if (run_dir.empty()) throw Error("config: run_dir must be set");
}

nlohmann::ordered_json PipelineConfig::analysis_json() const {
  std::vector<std::string> exclude(features.exclude_tokens.begin(), features.exclude_tokens.end());
  nlohmann::ordered_json j;
  j["corpus"] = {{"corpus_path", path_json(corpus_path)}};
  j["features"] = {{"max_features", features.max_features},
                   {"ngram_min", features.ngram.min},
                   {"ngram_max", features.ngram.max},
                   {"min_df", features.min_df},
                   {"stopwords_path", path_json(stopwords_path)},
                   {"include", features.include_tokens},
                   {"exclude", exclude}};
  j["lda"] = topicmodel::config_to_json(lda);
  j["classifier"] = {{"learning_rate", classifier.learning_rate},
                     {"l2", classifier.l2},
                     {"max_epochs", classifier.max_epochs},
                     {"tolerance", classifier.tolerance},
                     {"holdout", holdout}};
  j["lexicon"] = {{"lexicon_path", path_json(lexicon_path)}};
  j["trends"] = {{"external_csv_path", path_json(external_csv_path)}, {"locations", locations}};
  return j;
}

std::string PipelineConfig::hash() const { return sha256_hex(analysis_json().dump()); }

}  // namespace stressorlens::app
