#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stressorlens/app/pipeline.hpp"
#include "stressorlens/app/service.hpp"
#include "stressorlens/csv.hpp"
#include "stressorlens/error.hpp"

extern char** environ;

namespace sl = stressorlens;
using namespace stressorlens::app;

namespace {

struct Globals {
  std::optional<std::string> config;
  std::optional<SnapshotId> snapshot;
  std::map<std::string, std::string> flags;
};

// "--max_features,--max-features"
std::string flag_name(std::string_view key) {
  std::string dashed(key);
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  return dashed == key ? "--" + dashed : "--" + std::string(key) + ",--" + dashed;
}

void emit(const StageOutput& out) {
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << format_summary(out.summary) << std::endl;
}

Snapshot read_snapshot(const SnapshotStore& store, const std::optional<SnapshotId>& id) {
  const auto chosen = id ? id : store.latest();
  if (!chosen) {
    throw sl::MissingArtifactError(artifact::kPosts,
                                   "no snapshots in " + store.run_dir().string() + "; run `ingest` first");
  }
  return store.read(*chosen);
}

fs::path report_path(const PipelineConfig& c, const std::optional<std::string>& out, const std::string& name) {
  if (out) return *out;
  return c.run_dir / "reports" / name;
}

void write_report(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw sl::Error("cannot write " + path.string());
  f << bytes;
  if (!f) throw sl::Error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pandemic stressor analysis over a Reddit submission corpus"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "INI configuration file");
  app.add_option("--snapshot", g.snapshot, "snapshot to read (default: latest)");
  for (const auto& k : config_keys()) {
    app.add_option_function<std::string>(
        flag_name(k.name), [&g, key = std::string(k.name)](const std::string& v) { g.flags[key] = v; },
        std::string(k.help));
  }

  std::map<std::string, Stage> stage_commands;
  for (Stage s : {Stage::Ingest, Stage::Train, Stage::ImputeFlairs, Stage::Subset, Stage::LexiconLabel, Stage::Trends}) {
    const std::string name(stage_name(s));
    app.add_subcommand(name, "run the " + name + " stage and write a new snapshot")->fallthrough();
    stage_commands[name] = s;
  }
  auto* correlate = app.add_subcommand("correlate", "Pearson r between LDA and lexicon series")->fallthrough();
  std::vector<std::string> pairs;
  std::optional<std::string> correlate_out;
  correlate->add_option("--pair", pairs, "LDA_GROUP=LEXICON_TOPIC (repeatable)");
  correlate->add_option("--out", correlate_out, "report path");

  auto* samples = app.add_subcommand("samples", "review samples per topic")->fallthrough();
  std::optional<std::size_t> sample_topic;
  std::uint64_t sample_seed = 0;
  std::optional<std::string> samples_out;
  samples->add_option("--topic", sample_topic, "single topic (default: all)");
  samples->add_option("--seed", sample_seed, "random-draw seed");
  samples->add_option("--out", samples_out, "report path");

  auto* exporter = app.add_subcommand("export-dashboard", "write dashboard CSV and JSON files")->fallthrough();
  std::optional<std::string> export_out;
  exporter->add_option("--out", export_out, "output directory (default: <run_dir>/dashboard)");

  app.add_subcommand("serve", "serve the HTTP API")->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<fs::path> file;
    if (g.config) file = fs::path(*g.config);
    const auto config = load_config(file, environment_overrides(environ), g.flags);
    SnapshotStore store(config.run_dir);
    const auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    if (auto it = stage_commands.find(command); it != stage_commands.end()) {
      emit(run_stage(store, config, it->second, g.snapshot).output);
      return 0;
    }
    if (command == "serve") {
      Service service(config);
      std::cerr << "listening on " << config.host << ":" << config.port << std::endl;
      service.listen(config.host, config.port);
      return 0;
    }

    const auto snap = read_snapshot(store, g.snapshot);
    const auto id = std::to_string(snap.info.id);
    if (command == "correlate") {
      auto bundle = load_trends(snap.files);
      auto table = bundle.correlations;
      if (!pairs.empty()) {
        std::vector<std::pair<std::string, std::string>> chosen;
        for (const auto& p : pairs) {
          const auto eq = p.find('=');
          if (eq == std::string::npos) throw sl::Error("--pair expects LDA_GROUP=LEXICON_TOPIC, got '" + p + "'");
          chosen.emplace_back(p.substr(0, eq), p.substr(eq + 1));
        }
        table = sl::trends::compare_methods(bundle.lda, bundle.lexicon, chosen);
      }
      const auto path = report_path(config, correlate_out, "correlations-" + id + ".json");
      write_report(path, sl::trends::correlations_to_json(table).dump(2) + "\n");
      Summary summary{{"snapshot", id}, {"pairs", std::to_string(table.size())}};
      for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& c = table[i];
        const auto r = c.r ? sl::csv::format_double(*c.r) : "NA";
        summary.emplace_back("r" + std::to_string(i + 1), r);
        Summary line{{"pair", std::to_string(i + 1)}, {"lda", c.lda_label}, {"lexicon", c.lexicon_label},
                     {"months", std::to_string(c.n_months)}, {"r", r}};
        if (!c.error.empty()) line.emplace_back("error", c.error);
        std::cerr << format_summary(line) << "\n";
      }
      summary.emplace_back("report", path.string());
      std::cout << format_summary(summary) << std::endl;
      return 0;
    }
    if (command == "samples") {
      const auto model = load_lda(snap.files);
      const auto ids = decode_ids(require(snap.files, artifact::kLdaPosts));
      nlohmann::ordered_json report = nlohmann::ordered_json::array();
      std::size_t flagged = 0;
      std::size_t first = 0, last = model.num_topics();
      if (sample_topic) {
        if (*sample_topic >= model.num_topics()) throw sl::Error("topic " + std::to_string(*sample_topic) + " does not exist");
        first = *sample_topic;
        last = first + 1;
      }
      for (std::size_t k = first; k < last; ++k) {
        const auto sel = sl::topicmodel::select_review_samples(model, k, ids, sample_seed);
        flagged += sel.flagged;
        nlohmann::ordered_json entry;
        entry["topic"] = k;
        entry["flagged"] = sel.flagged;
        auto list = nlohmann::ordered_json::array();
        for (const auto& s : sel.samples) {
          list.push_back({{"post_id", s.post_id},
                          {"theta", s.theta_value},
                          {"selection", s.selection == sl::topicmodel::SampleKind::TopRanked ? "top" : "random"}});
        }
        entry["samples"] = list;
        report.push_back(entry);
      }
      const auto path = report_path(config, samples_out, "samples-" + id + ".json");
      write_report(path, report.dump(2) + "\n");
      std::cout << format_summary({{"snapshot", id},
                                   {"topics", std::to_string(last - first)},
                                   {"flagged", std::to_string(flagged)},
                                   {"report", path.string()}})
                << std::endl;
      return 0;
    }
    if (command == "export-dashboard") {
      const auto bundle = load_trends(snap.files);
      const fs::path dir = export_out ? fs::path(*export_out) : config.run_dir / "dashboard";
      sl::trends::export_dashboard(bundle, dir);
      std::cout << format_summary({{"snapshot", id}, {"out", dir.string()}}) << std::endl;
      return 0;
    }
  } catch (const sl::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
