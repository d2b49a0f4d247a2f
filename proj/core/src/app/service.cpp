#include "stressorlens/app/service.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <unordered_map>

#include "httplib.h"
#include "stressorlens/error.hpp"

namespace stressorlens::app {

struct RunState {
  SnapshotInfo info;
  FileSet files;
  std::optional<topicmodel::LdaModel> lda;
  std::vector<std::string> lda_ids;
  std::unordered_map<std::string, std::size_t> lda_row;
  std::optional<trends::DashboardBundle> trends;
  std::vector<corpus::CleanPost> posts;
  std::unordered_map<std::string, std::size_t> post_index;
  std::unordered_map<std::string, std::vector<std::string>> matches;
};

namespace {

using json = nlohmann::ordered_json;

ApiResponse error(int status, const std::string& message, std::optional<SnapshotId> snapshot = std::nullopt) {
  json body;
  body["error"] = message;
  body["snapshot_id"] = snapshot ? json(*snapshot) : json();
  return {status, std::move(body)};
}

ApiResponse field_error(const std::string& field, const std::string& message, SnapshotId snapshot) {
  auto r = error(400, message, snapshot);
  r.body["field"] = field;
  return r;
}

ApiResponse ok(SnapshotId snapshot, json body, int status = 200) {
  json out;
  out["snapshot_id"] = snapshot;
  for (auto& [k, v] : body.items()) out[k] = std::move(v);
  return {status, std::move(out)};
}

std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  if (s.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    const auto j = path.find('/', i);
    const auto part = path.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i);
    if (!part.empty()) out.emplace_back(part);
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  return out;
}

std::shared_ptr<RunState> load_state(const Snapshot& snap) {
  auto s = std::make_shared<RunState>();
  s->info = snap.info;
  s->files = snap.files;
  if (has(s->files, artifact::kLdaManifest)) {
    s->lda = load_lda(s->files);
    s->lda_ids = decode_ids(require(s->files, artifact::kLdaPosts));
    for (std::size_t i = 0; i < s->lda_ids.size(); ++i) s->lda_row.emplace(s->lda_ids[i], i);
  }
  if (has(s->files, artifact::kTrends)) s->trends = load_trends(s->files);
  if (has(s->files, artifact::kImputedPosts)) s->posts = decode_posts(s->files.at(artifact::kImputedPosts));
  else if (has(s->files, artifact::kPosts)) s->posts = decode_posts(s->files.at(artifact::kPosts));
  for (std::size_t i = 0; i < s->posts.size(); ++i) s->post_index.emplace(s->posts[i].id, i);
  if (has(s->files, artifact::kAnnotations)) {
    for (auto& a : load_annotations(s->files)) s->matches.emplace(a.post_id, std::move(a.topics));
  }
  return s;
}

json curation_json(const std::vector<std::string>& include, const std::set<std::string>& exclude) {
  json j;
  j["include"] = include;
  j["exclude"] = std::vector<std::string>(exclude.begin(), exclude.end());
  return j;
}

std::vector<std::string> string_list(const nlohmann::json& body, const std::string& field) {
  if (!body.contains(field)) return {};
  const auto& v = body.at(field);
  if (!v.is_array()) throw std::invalid_argument(field);
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw std::invalid_argument(field);
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "unknown";
}

Service::Service(PipelineConfig config) : config_(std::move(config)), store_(config_.run_dir) {}

Service::~Service() {
  stop();
  if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const RunState> Service::publish(SnapshotId id) {
  auto fresh = load_state(store_.read(id));
  std::lock_guard lock(state_mutex_);
  if (!state_ || state_->info.id <= id) state_ = fresh;
  return state_;
}

// Follows the newest snapshot, including ones written by the CLI.
std::shared_ptr<const RunState> Service::current() {
  const auto latest = store_.latest();
  {
    std::lock_guard lock(state_mutex_);
    if (!latest) return nullptr;
    if (state_ && state_->info.id == *latest) return state_;
  }
  return publish(*latest);
}

SnapshotId Service::commit(const FileSet& files, SnapshotId parent, const std::string& stage) {
  const auto id = store_.write(files, parent, stage, config_.hash());
  publish(id);
  return id;
}

ApiResponse Service::handle(std::string_view method, std::string_view path,
                            const std::map<std::string, std::string>& query, std::string_view body) {
  const auto parts = split_path(path);
  if (parts.size() < 2 || parts[0] != "api") return error(404, "no such endpoint");
  try {
    nlohmann::json parsed;
    if (method == "POST") {
      parsed = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body, nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) return error(400, "request body must be a JSON object");
    }
    const auto& head = parts[1];
    if (method == "POST" && head == "retrain" && parts.size() == 2) return post_retrain();
    if (method == "GET" && head == "jobs" && parts.size() == 3) {
      const auto id = parse_index(parts[2]);
      return id ? get_job(*id) : error(404, "no such job");
    }
    const auto state = current();
    if (!state) return error(404, "no snapshots yet; run `ingest` first");
    const auto& s = *state;

    if (method == "GET") {
      if (head == "snapshot" && parts.size() == 2) return get_snapshot(s);
      if (head == "topics" && parts.size() == 2) return get_topics(s);
      if (head == "topics" && parts.size() == 4 && parts[3] == "samples") {
        const auto k = parse_index(parts[2]);
        if (!k) return error(404, "no such topic", s.info.id);
        return get_samples(s, *k, query);
      }
      if (head == "features" && parts.size() == 2) return get_features(s);
      if (head == "trends" && parts.size() == 2) return get_trends(s, query);
      if (head == "external" && parts.size() == 2) return get_external(s);
      if (head == "correlations" && parts.size() == 2) return get_correlations(s);
      if (head == "posts" && parts.size() == 3) return get_post(s, parts[2]);
      if (head == "dashboard" && parts.size() == 2) return get_dashboard(s);
    } else if (method == "POST") {
      if (head == "topics" && parts.size() == 4 && parts[3] == "name") {
        const auto k = parse_index(parts[2]);
        if (!k) return error(404, "no such topic", s.info.id);
        return post_topic_name(*k, parsed);
      }
      if (head == "groups" && parts.size() == 2) return post_groups(parsed);
      if (head == "features" && parts.size() == 2) return post_features(s, parsed);
    }
    return error(404, "no such endpoint", s.info.id);
  } catch (const MissingArtifactError& e) {
    return error(404, e.what());
  } catch (const IntegrityError& e) {
    return error(500, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

ApiResponse Service::get_snapshot(const RunState& s) {
  json j;
  j["parent"] = s.info.parent ? json(*s.info.parent) : json();
  j["timestamp"] = s.info.timestamp;
  j["stage"] = s.info.stage;
  j["config_hash"] = s.info.config_hash;
  std::vector<std::string> files;
  for (const auto& [name, digest] : s.info.sha256) files.push_back(name);
  j["files"] = files;
  std::vector<std::string> stages;
  for (Stage st : {Stage::Ingest, Stage::Train, Stage::ImputeFlairs, Stage::Subset, Stage::LexiconLabel, Stage::Trends}) {
    const auto& outputs = stage_files(st);
    if (!outputs.empty() && has(s.files, outputs.front())) stages.emplace_back(stage_name(st));
  }
  j["stages"] = stages;
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::get_topics(const RunState& s) {
  if (!s.lda) return error(404, "no topic model; run `train` first", s.info.id);
  const auto& m = *s.lda;
  json topics = json::array();
  for (std::size_t k = 0; k < m.num_topics(); ++k) {
    double prevalence = 0.0;
    for (std::size_t d = 0; d < m.num_docs(); ++d) prevalence += m.doc_topic(d, k);
    if (m.num_docs()) prevalence /= static_cast<double>(m.num_docs());
    json terms = json::array();
    for (const auto& [term, p] : topicmodel::top_terms(m, k, 10)) terms.push_back({{"term", term}, {"weight", p}});
    json t;
    t["id"] = k;
    t["name"] = m.topic_names[k] ? json(*m.topic_names[k]) : json();
    t["group"] = m.group_map.groups[m.group_map.assignment[k]];
    t["prevalence"] = prevalence;
    t["top_terms"] = terms;
    topics.push_back(std::move(t));
  }
  json j;
  j["groups"] = m.group_map.groups;
  j["topics"] = topics;
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::get_samples(const RunState& s, std::size_t topic, const std::map<std::string, std::string>& query) {
  if (!s.lda) return error(404, "no topic model; run `train` first", s.info.id);
  if (topic >= s.lda->num_topics()) return error(404, "no such topic", s.info.id);
  std::uint64_t seed = 0;
  if (auto it = query.find("seed"); it != query.end()) {
    auto v = parse_index(it->second);
    if (!v) return field_error("seed", "seed must be a non-negative integer", s.info.id);
    seed = *v;
  }
  const auto sel = topicmodel::select_review_samples(*s.lda, topic, s.lda_ids, seed);
  json samples = json::array();
  for (const auto& r : sel.samples) {
    json e;
    e["post_id"] = r.post_id;
    e["theta"] = r.theta_value;
    e["selection"] = r.selection == topicmodel::SampleKind::TopRanked ? "top" : "random";
    if (auto it = s.post_index.find(r.post_id); it != s.post_index.end()) e["text"] = s.posts[it->second].text;
    samples.push_back(std::move(e));
  }
  json j;
  j["topic"] = topic;
  j["seed"] = seed;
  j["flagged"] = sel.flagged;
  j["samples"] = samples;
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::post_topic_name(std::size_t topic, const nlohmann::json& body) {
  std::optional<std::string> name;
  if (!body.contains("name")) return error(400, "missing field 'name'");
  const auto& v = body.at("name");
  if (v.is_string() && !v.get<std::string>().empty()) name = v.get<std::string>();
  else if (!v.is_null() && !(v.is_string() && v.get<std::string>().empty())) {
    auto r = error(400, "name must be a string or null");
    r.body["field"] = "name";
    return r;
  }
  std::lock_guard lock(write_mutex_);
  const auto base = current();
  if (!base->lda) return error(404, "no topic model; run `train` first", base->info.id);
  if (topic >= base->lda->num_topics()) return error(404, "no such topic", base->info.id);
  const auto id = commit(with_topic_name(config_, base->files, topic, name), base->info.id, "name-topic");
  json j;
  j["topic"] = topic;
  j["name"] = name ? json(*name) : json();
  return ok(id, std::move(j));
}

ApiResponse Service::post_groups(const nlohmann::json& body) {
  std::lock_guard lock(write_mutex_);
  const auto base = current();
  if (!base->lda) return error(404, "no topic model; run `train` first", base->info.id);
  topicmodel::TopicGroupMap map = base->lda->group_map;
  try {
    if (body.contains("groups")) map.groups = body.at("groups").get<std::vector<std::string>>();
    if (!body.contains("assignment")) return field_error("assignment", "missing field 'assignment'", base->info.id);
    map.assignment = body.at("assignment").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception&) {
    return field_error(body.contains("assignment") ? "assignment" : "groups",
                       "groups must be a list of names and assignment a list of group indices", base->info.id);
  }
  try {
    map.validate(base->lda->num_topics());
  } catch (const std::invalid_argument& e) {
    return field_error("assignment", e.what(), base->info.id);
  }
  const auto id = commit(with_group_map(config_, base->files, map), base->info.id, "groups");
  json j;
  j["groups"] = map.groups;
  j["assignment"] = map.assignment;
  return ok(id, std::move(j));
}

ApiResponse Service::get_features(const RunState& s) {
  json applied;
  if (has(s.files, artifact::kFeatures)) {
    const auto f = nlohmann::json::parse(s.files.at(artifact::kFeatures));
    applied = curation_json(f.at("include").get<std::vector<std::string>>(),
                            f.at("exclude").get<std::set<std::string>>());
  }
  json pending;
  {
    std::lock_guard lock(curation_mutex_);
    const auto c = read_curation(store_.run_dir());
    const auto f = effective_features(config_, c);
    pending = curation_json(f.include_tokens, f.exclude_tokens);
  }
  json j;
  j["applied"] = applied;
  j["pending"] = pending;
  j["retrain_needed"] = applied.is_null() || applied != pending;
  if (s.lda) {
    const auto& vocab = *s.lda->vocabulary;
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < vocab.size(); ++i) terms.push_back(vocab.terms[i]);
    j["vocabulary"] = terms;
  }
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::post_features(const RunState& s, const nlohmann::json& body) {
  std::map<std::string, std::vector<std::string>> edits;
  for (const char* field : {"add_include", "add_exclude", "remove"}) {
    try {
      for (const auto& raw : string_list(body, field)) {
        auto t = textprep::normalize_term(raw);
        if (t.empty()) return field_error(field, std::string("empty token in ") + field, s.info.id);
        edits[field].push_back(std::move(t));
      }
    } catch (const std::invalid_argument&) {
      return field_error(field, std::string(field) + " must be a list of strings", s.info.id);
    }
  }
  for (const auto& [k, v] : body.items()) {
    if (k != "add_include" && k != "add_exclude" && k != "remove") return field_error(k, "unknown field '" + k + "'", s.info.id);
  }

  std::lock_guard lock(curation_mutex_);
  const auto f = effective_features(config_, read_curation(store_.run_dir()));
  FeatureCuration c{f.include_tokens, f.exclude_tokens};
  for (const auto& t : edits["remove"]) {
    std::erase(c.include, t);
    c.exclude.erase(t);
  }
  for (const auto& t : edits["add_include"]) {
    if (c.exclude.count(t) || std::count(edits["add_exclude"].begin(), edits["add_exclude"].end(), t)) {
      return field_error("add_include", "token '" + t + "' would be in both include and exclude lists", s.info.id);
    }
    if (std::find(c.include.begin(), c.include.end(), t) == c.include.end()) c.include.push_back(t);
  }
  for (const auto& t : edits["add_exclude"]) {
    if (std::find(c.include.begin(), c.include.end(), t) != c.include.end()) {
      return field_error("add_exclude", "token '" + t + "' would be in both include and exclude lists", s.info.id);
    }
    c.exclude.insert(t);
  }
  try {
    effective_features(config_, c).validate();
  } catch (const std::invalid_argument& e) {
    return field_error("add_include", e.what(), s.info.id);
  }
  write_curation(store_.run_dir(), c);
  json j;
  j["pending"] = curation_json(c.include, c.exclude);
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::post_retrain() {
  const auto base = store_.latest();
  if (!base) return error(404, "no snapshots yet; run `ingest` first");
  std::lock_guard lock(jobs_mutex_);
  if (job_active_) {
    auto r = error(409, "a retrain job is already running", *base);
    for (const auto& [id, j] : jobs_) {
      if (j.state == JobState::Queued || j.state == JobState::Running) r.body["job_id"] = id;
    }
    return r;
  }
  if (worker_.joinable()) worker_.join();
  const auto id = next_job_++;
  JobStatus status;
  status.id = id;
  status.base = base;
  jobs_[id] = status;
  job_active_ = true;
  worker_ = std::jthread([this, id, b = *base] { run_retrain(id, b); });
  json j;
  j["job_id"] = id;
  j["state"] = to_string(JobState::Queued);
  return ok(*base, std::move(j), 202);
}

void Service::run_retrain(std::uint64_t job_id, SnapshotId base) {
  {
    std::lock_guard lock(jobs_mutex_);
    jobs_[job_id].state = JobState::Running;
    jobs_[job_id].started = utc_now();
  }
  JobStatus result;
  try {
    if (retrain_gate) retrain_gate();
    std::optional<FeatureCuration> curation;
    {
      std::lock_guard lock(curation_mutex_);
      curation = read_curation(store_.run_dir());
    }
    const auto parent = store_.read(base).files;
    const auto trained = run_train(config_, parent, effective_features(config_, curation));
    std::lock_guard lock(write_mutex_);
    const auto latest = store_.latest().value_or(base);
    const auto files = publish_retrain(config_, store_.read(latest).files, trained);
    result.snapshot = commit(files, latest, "retrain");
    result.state = JobState::Done;
  } catch (const std::exception& e) {
    result.state = JobState::Failed;
    result.error = e.what();
  }
  std::lock_guard lock(jobs_mutex_);
  auto& job = jobs_[job_id];
  job.state = result.state;
  job.snapshot = result.snapshot;
  job.error = result.error;
  job.finished = utc_now();
  job_active_ = false;
}

ApiResponse Service::get_job(std::uint64_t id) {
  const auto status = job(id);
  if (!status) return error(404, "no such job");
  json j;
  j["job_id"] = status->id;
  j["state"] = to_string(status->state);
  j["started"] = status->started.empty() ? json() : json(status->started);
  j["finished"] = status->finished.empty() ? json() : json(status->finished);
  j["base_snapshot"] = status->base ? json(*status->base) : json();
  j["result_snapshot"] = status->snapshot ? json(*status->snapshot) : json();
  j["error"] = status->error.empty() ? json() : json(status->error);
  const auto latest = store_.latest();
  return ok(latest.value_or(0), std::move(j));
}

std::optional<JobStatus> Service::job(std::uint64_t id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void Service::wait_for_jobs() {
  std::jthread done;
  {
    std::lock_guard lock(jobs_mutex_);
    done = std::move(worker_);
  }
  if (done.joinable()) done.join();
}

ApiResponse Service::get_trends(const RunState& s, const std::map<std::string, std::string>& query) {
  if (!s.trends) return error(404, "no trends; run `trends` first", s.info.id);
  std::string source = "lda";
  if (auto it = query.find("source"); it != query.end()) source = it->second;
  if (source != "lda" && source != "lexicon") return field_error("source", "source must be lda or lexicon", s.info.id);
  bool normalize = false;
  if (auto it = query.find("normalize"); it != query.end()) {
    if (it->second == "true" || it->second == "1") normalize = true;
    else if (it->second != "false" && it->second != "0") {
      return field_error("normalize", "normalize must be true or false", s.info.id);
    }
  }
  const auto& b = *s.trends;
  const auto& props = source == "lda" ? b.lda_proportions : b.lexicon_proportions;
  json j;
  j["source"] = source;
  j["normalized"] = normalize;
  j["series"] = trends::series_to_json(normalize ? props.series : (source == "lda" ? b.lda : b.lexicon));
  if (normalize) {
    std::vector<std::string> empty;
    for (const auto& m : props.empty_months) empty.push_back(m.str());
    j["empty_months"] = empty;
  }
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::get_external(const RunState& s) {
  if (!s.trends) return error(404, "no trends; run `trends` first", s.info.id);
  if (!s.trends->external) return error(404, "no external series configured", s.info.id);
  json j;
  j["external"] = trends::external_to_json(*s.trends->external);
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::get_correlations(const RunState& s) {
  if (!s.trends) return error(404, "no trends; run `trends` first", s.info.id);
  json j;
  j["correlations"] = trends::correlations_to_json(s.trends->correlations);
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::get_post(const RunState& s, const std::string& id) {
  auto it = s.post_index.find(id);
  if (it == s.post_index.end()) return error(404, "no such post", s.info.id);
  const auto& p = s.posts[it->second];
  json j;
  j["id"] = p.id;
  j["month"] = p.month.str();
  j["created_utc"] = p.created_utc;
  j["text"] = p.text;
  j["flair_group"] = corpus::to_string(p.flair_group);
  j["flair_source"] = corpus::to_string(p.flair_source);
  if (auto r = s.lda_row.find(id); s.lda && r != s.lda_row.end()) {
    const auto theta = s.lda->doc_topic.row(r->second);
    j["theta"] = std::vector<double>(theta.begin(), theta.end());
    j["dominant_topic"] = topicmodel::dominant_topic(theta);
  } else {
    j["theta"] = nullptr;
  }
  if (auto m = s.matches.find(id); m != s.matches.end()) j["lexicon_topics"] = m->second;
  else j["lexicon_topics"] = nullptr;
  return ok(s.info.id, std::move(j));
}

ApiResponse Service::get_dashboard(const RunState& s) {
  if (!s.trends) return error(404, "no trends; run `trends` first", s.info.id);
  json j;
  j["dashboard"] = trends::dashboard_to_json(*s.trends);
  return ok(s.info.id, std::move(j));
}

void Service::listen(const std::string& host, int port) {
  if (start(host, port) < 0) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  server_thread_.join();
}

int Service::start(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  const auto route = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto r = handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(".*", route);
  server_->Post(".*", route);
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) return -1;
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace stressorlens::app
