#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "stressorlens/matrix_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kConfig = fs::path(STRESSORLENS_DATA_DIR) / "fixture" / "config.ini";

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() / ("sl-cli-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Result run(const fs::path& run_dir, const std::string& args, const std::string& env = "") {
  const auto err_file = run_dir.parent_path() / (run_dir.filename().string() + ".stderr");
  const std::string cmd = env + " '" + std::string(STRESSORLENS_CLI) + "' --config '" + kConfig.string() +
                          "' --run_dir '" + run_dir.string() + "' " + args + " 2>'" + err_file.string() + "'";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = stressorlens::read_file(err_file);
  fs::remove(err_file);
  return r;
}

std::map<std::string, std::string> parse_summary(const std::string& line) {
  std::map<std::string, std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\n')) ++i;
    if (i >= line.size()) break;
    const auto eq = line.find('=', i);
    REQUIRE(eq != std::string::npos);
    const auto key = line.substr(i, eq - i);
    i = eq + 1;
    std::string value;
    if (i < line.size() && line[i] == '"') {
      ++i;
      while (i < line.size() && line[i] != '"') {
        if (line[i] == '\\') ++i;
        value += line[i++];
      }
      ++i;
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\n') value += line[i++];
    }
    out[key] = value;
  }
  return out;
}

const std::vector<std::string> kSequence = {"ingest", "train", "impute-flairs", "subset",
                                            "lexicon-label", "trends", "export-dashboard"};

}  // namespace

TEST_CASE("full command sequence on the bundled fixture") {
  TempDir dir;
  const auto run_dir = dir.path / "run";
  for (const auto& cmd : kSequence) {
    const auto r = run(run_dir, cmd);
    CAPTURE(cmd);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
    const auto s = parse_summary(r.out);
    CHECK(s.count("snapshot"));
    if (cmd != "export-dashboard") CHECK(s.at("stage") == cmd);
  }
  CHECK(fs::exists(run_dir / "dashboard" / "dashboard.json"));
  CHECK(fs::exists(run_dir / "dashboard" / "trends_lda.csv"));
  CHECK(fs::exists(run_dir / "snapshots" / "000006" / "trends.json"));

  const auto ingest = run(dir.path / "other", "ingest");
  CHECK(parse_summary(ingest.out).at("malformed") == "1");
  CHECK(parse_summary(ingest.out).at("duplicates") == "1");
  CHECK(ingest.err.find("duplicate id") != std::string::npos);

  SUBCASE("correlate prints r values for the default pairs") {
    const auto r = run(run_dir, "correlate");
    REQUIRE(r.code == 0);
    const auto s = parse_summary(r.out);
    CHECK(s.at("pairs") == "2");
    CHECK(std::abs(std::stod(s.at("r1"))) <= 1.0);
    CHECK(std::abs(std::stod(s.at("r2"))) <= 1.0);
    CHECK(fs::exists(s.at("report")));
    CHECK(r.err.find("Fear of coronavirus") != std::string::npos);
  }
  SUBCASE("samples writes a report per topic") {
    const auto r = run(run_dir, "samples --seed 3");
    REQUIRE(r.code == 0);
    const auto s = parse_summary(r.out);
    CHECK(s.at("topics") == "10");
    const auto report = nlohmann::json::parse(stressorlens::read_file(s.at("report")));
    CHECK(report.size() == 10);
    CHECK(run(run_dir, "samples --topic 42").code == 1);
  }
  SUBCASE("replaying a stage on the same snapshot reproduces its outputs") {
    const auto r = run(run_dir, "--snapshot 1 train");
    REQUIRE(r.code == 0);
    const auto id = parse_summary(r.out).at("snapshot");
    const auto replay = run_dir / "snapshots" / std::string(6 - id.size(), '0').append(id);
    for (const char* f : {"lda_topic_word.bin", "lda_doc_topic.bin", "vocabulary.json", "top_terms.csv"}) {
      CAPTURE(f);
      CHECK(stressorlens::read_file(replay / f) == stressorlens::read_file(run_dir / "snapshots" / "000002" / f));
    }
  }
  SUBCASE("read-only commands honor --snapshot") {
    CHECK(run(run_dir, "--snapshot 2 export-dashboard").code == 2);
    CHECK(run(run_dir, "--snapshot 6 export-dashboard --out '" + (dir.path / "x").string() + "'").code == 0);
    CHECK(fs::exists(dir.path / "x" / "dashboard.json"));
  }
}

TEST_CASE("missing prerequisites exit with code 2 and name the artifact") {
  TempDir dir;
  const auto run_dir = dir.path / "run";
  auto r = run(run_dir, "train");
  CHECK(r.code == 2);
  CHECK(r.err.find("ingest") != std::string::npos);

  REQUIRE(run(run_dir, "ingest").code == 0);
  r = run(run_dir, "trends");
  CHECK(r.code == 2);
  CHECK(r.err.find("lda_manifest.json") != std::string::npos);
  CHECK(r.err.find("train") != std::string::npos);

  r = run(run_dir, "subset");
  CHECK(r.code == 2);
  CHECK(r.err.find("posts_imputed.jsonl") != std::string::npos);
  CHECK(run(run_dir, "correlate").code == 2);
}

TEST_CASE("computation and configuration errors exit with code 1") {
  TempDir dir;
  const auto run_dir = dir.path / "run";
  CHECK(run(run_dir, "--k 0 ingest").code == 1);
  CHECK(run(run_dir, "--corpus_path /nonexistent.jsonl ingest").code == 1);
  REQUIRE(run(run_dir, "ingest").code == 0);
  const auto r = run(run_dir, "--min_df 100000 train");
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  CHECK(run(run_dir, "--snapshot 77 train").code == 1);
}

TEST_CASE("flags and environment override the config file") {
  TempDir dir;
  const auto run_dir = dir.path / "run";
  REQUIRE(run(run_dir, "ingest").code == 0);
  auto s = parse_summary(run(run_dir, "--max_features 40 train", "STRESSORLENS_K=4").out);
  CHECK(s.at("terms") == "40");
  CHECK(s.at("topics") == "4");
  s = parse_summary(run(run_dir, "--max-features 30 --k 3 train", "STRESSORLENS_K=4").out);
  CHECK(s.at("terms") == "30");
  CHECK(s.at("topics") == "3");
}

TEST_CASE("two runs with the same seed produce byte-identical dashboards") {
  TempDir dir;
  std::string first;
  for (const char* name : {"a", "b"}) {
    const auto run_dir = dir.path / name;
    for (const auto& cmd : kSequence) REQUIRE(run(run_dir, cmd).code == 0);
    const auto bytes = stressorlens::read_file(run_dir / "dashboard" / "dashboard.json");
    CHECK(bytes.size() > 100);
    if (first.empty()) first = bytes;
    else CHECK(bytes == first);
  }
}
