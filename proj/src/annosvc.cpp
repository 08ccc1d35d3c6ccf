#include "valence/annosvc.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>

#include "valence/records.hpp"
#include "valence/util/random.hpp"

namespace valence {

namespace {

constexpr std::string_view kLogFormat = "annosvc-events/1";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Event {
  std::uint64_t seq = 0;
  std::string annotator;
  std::string chunk_id;
  std::optional<ValenceLabel> label;  // nullopt for a skip
  std::string reason;
  std::string timestamp;
};

Json event_json(const Event& e) {
  Json j = {{"seq", e.seq},
            {"type", e.label ? "label" : "skip"},
            {"annotator", e.annotator},
            {"chunk_id", e.chunk_id},
            {"timestamp", e.timestamp}};
  if (e.label) {
    j["label"] = to_string(*e.label);
  } else {
    j["reason"] = e.reason;
  }
  return j;
}

Event event_from_json(const Json& j) {
  Event e;
  e.seq = require_field<std::uint64_t>(j, "seq");
  e.annotator = require_field<std::string>(j, "annotator");
  e.chunk_id = require_field<std::string>(j, "chunk_id");
  e.timestamp = optional_field<std::string>(j, "timestamp", "");
  const auto type = require_field<std::string>(j, "type");
  if (type == "label") {
    e.label = require_label(require_field<std::string>(j, "label"));
  } else if (type == "skip") {
    e.reason = optional_field<std::string>(j, "reason", "");
  } else {
    throw ValidationError("unknown event type '" + type + "'");
  }
  return e;
}

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("write to " + path.string() + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) throw Error("fsync of " + path.string() + " failed: " + std::strerror(errno));
}

}  // namespace

int ServiceError::status() const noexcept {
  switch (kind_) {
    case Kind::kAuth:
      return 401;
    case Kind::kConflict:
      return 409;
    case Kind::kNotFound:
      return 404;
  }
  return 500;
}

std::string_view ServiceError::code() const noexcept {
  switch (kind_) {
    case Kind::kAuth:
      return "auth";
    case Kind::kConflict:
      return "conflict";
    case Kind::kNotFound:
      return "not_found";
  }
  return "internal";
}

void TaskConfig::validate() const {
  if (task_id.empty()) throw ValidationError("task_id must be non-empty");
  if (roster.empty()) throw ValidationError("annotator roster must be non-empty");
  std::set<std::string> names(roster.begin(), roster.end());
  if (names.size() != roster.size()) throw ValidationError("annotator roster has duplicates");
  std::set<std::string> ids;
  for (const Chunk& c : pool) {
    if (!ids.insert(c.chunk_id).second) throw ValidationError("duplicate chunk id '" + c.chunk_id + "'");
  }
  std::set<std::string> seen;
  for (const std::string& id : overlap) {
    if (!ids.count(id)) throw ValidationError("overlap chunk '" + id + "' is not in the pool");
    if (!seen.insert(id).second) throw ValidationError("overlap chunk '" + id + "' listed twice");
  }
  for (const auto& [annotator, token] : tokens) {
    if (!names.count(annotator)) throw ValidationError("token for unknown annotator '" + annotator + "'");
  }
}

std::map<std::string, std::vector<std::string>> plan_queues(const TaskConfig& config) {
  const std::set<std::string> overlap(config.overlap.begin(), config.overlap.end());
  std::vector<std::string> rest;
  for (const Chunk& c : config.pool) {
    if (!overlap.count(c.chunk_id)) rest.push_back(c.chunk_id);
  }
  Rng(mix_seed(config.seed, "assign")).shuffle(rest);

  std::map<std::string, std::vector<std::string>> queues;
  for (const std::string& a : config.roster) queues[a] = config.overlap;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    queues[config.roster[i % config.roster.size()]].push_back(rest[i]);
  }
  for (auto& [annotator, q] : queues) Rng(mix_seed(config.seed, annotator)).shuffle(q);
  return queues;
}

struct AnnotationService::State {
  std::vector<Event> events;
  std::map<std::string, std::set<std::string>> done;  // annotator -> chunk ids
  std::map<std::string, std::size_t> labeled;
  std::map<std::string, std::size_t> skipped;
  std::size_t label_events = 0;
};

AnnotationService::AnnotationService(TaskConfig config, std::filesystem::path log_path)
    : config_(std::move(config)), log_path_(std::move(log_path)) {
  config_.validate();
  for (std::size_t i = 0; i < config_.pool.size(); ++i) chunk_index_[config_.pool[i].chunk_id] = i;
  overlap_.insert(config_.overlap.begin(), config_.overlap.end());
  queues_ = plan_queues(config_);
  state_ = std::make_shared<State>();
  replay();
}

AnnotationService::~AnnotationService() {
  if (fd_ >= 0) ::close(fd_);
}

void AnnotationService::replay() {
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  const bool exists = std::filesystem::exists(log_path_);
  std::string text = exists ? read_text(log_path_) : std::string();
  if (!text.empty() && text.back() != '\n') {
    // A torn final line was never acknowledged; drop it.
    text.resize(text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1);
    std::filesystem::resize_file(log_path_, text.size());
  }

  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open " + log_path_.string() + ": " + std::strerror(errno));

  if (text.empty()) {
    const Json header = {{"task_id", config_.task_id}, {"seed", config_.seed}, {"format", kLogFormat}};
    write_all(fd_, dump_jsonl(header, {}), log_path_);
    return;
  }

  const JsonlFile file = parse_jsonl(text, log_path_.string());
  if (optional_field<std::string>(file.header, "task_id", "") != config_.task_id) {
    throw ValidationError("event log " + log_path_.string() + " belongs to another task");
  }
  auto state = std::make_shared<State>();
  for (std::size_t i = 0; i < file.records.size(); ++i) {
    try {
      Event e = event_from_json(file.records[i]);
      const auto q = queues_.find(e.annotator);
      if (q == queues_.end() ||
          std::find(q->second.begin(), q->second.end(), e.chunk_id) == q->second.end() ||
          state->done[e.annotator].count(e.chunk_id)) {
        throw ValidationError("event is not valid for the task assignment");
      }
      state->done[e.annotator].insert(e.chunk_id);
      if (e.label) {
        ++state->labeled[e.annotator];
        ++state->label_events;
      } else {
        ++state->skipped[e.annotator];
      }
      state->events.push_back(std::move(e));
    } catch (const ValidationError& err) {
      throw ParseError(log_path_.string(), i + 2, err.what());
    }
  }
  std::lock_guard lock(snapshot_mu_);
  state_ = std::move(state);
}

std::shared_ptr<const AnnotationService::State> AnnotationService::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return state_;
}

void AnnotationService::authenticate(const std::string& annotator, const std::string& token) const {
  if (!queues_.count(annotator)) {
    throw ServiceError(ServiceError::Kind::kAuth, "unknown annotator '" + annotator + "'");
  }
  if (config_.tokens.empty()) return;
  const auto it = config_.tokens.find(annotator);
  if (it == config_.tokens.end() || it->second != token) {
    throw ServiceError(ServiceError::Kind::kAuth, "invalid token for annotator '" + annotator + "'");
  }
}

void AnnotationService::authenticate_any(const std::string& token) const {
  if (config_.tokens.empty()) return;
  for (const auto& [annotator, t] : config_.tokens) {
    if (t == token) return;
  }
  throw ServiceError(ServiceError::Kind::kAuth, "invalid token");
}

std::vector<std::string> AnnotationService::queue(const std::string& annotator) const {
  const auto it = queues_.find(annotator);
  if (it == queues_.end()) throw ServiceError(ServiceError::Kind::kAuth, "unknown annotator '" + annotator + "'");
  return it->second;
}

NextChunk AnnotationService::next_chunk(const std::string& annotator) const {
  const auto q = queues_.find(annotator);
  if (q == queues_.end()) throw ServiceError(ServiceError::Kind::kAuth, "unknown annotator '" + annotator + "'");
  const auto state = snapshot();
  const auto d = state->done.find(annotator);
  const std::size_t completed = d == state->done.end() ? 0 : d->second.size();
  NextChunk out;
  out.total = q->second.size();
  out.completed = completed;
  for (const std::string& id : q->second) {
    if (d != state->done.end() && d->second.count(id)) continue;
    out.chunk = config_.pool[chunk_index_.at(id)];
    out.position = completed + 1;
    return out;
  }
  out.done = true;
  return out;
}

Receipt AnnotationService::submit(const std::string& annotator, const std::string& chunk_id,
                                  const std::string& label) {
  return append(annotator, chunk_id, require_label(label), {});
}

Receipt AnnotationService::skip(const std::string& annotator, const std::string& chunk_id,
                                const std::string& reason) {
  return append(annotator, chunk_id, std::nullopt, reason);
}

Receipt AnnotationService::append(const std::string& annotator, const std::string& chunk_id,
                                  const std::optional<ValenceLabel>& label, const std::string& reason) {
  const auto q = queues_.find(annotator);
  if (q == queues_.end()) throw ServiceError(ServiceError::Kind::kAuth, "unknown annotator '" + annotator + "'");
  if (!chunk_index_.count(chunk_id)) {
    throw ServiceError(ServiceError::Kind::kNotFound, "unknown chunk '" + chunk_id + "'");
  }

  std::lock_guard writer(writer_mu_);
  const auto current = snapshot();
  const auto d = current->done.find(annotator);
  const bool assigned = std::find(q->second.begin(), q->second.end(), chunk_id) != q->second.end();
  if (!assigned || (d != current->done.end() && d->second.count(chunk_id))) {
    throw ServiceError(ServiceError::Kind::kConflict,
                       "chunk '" + chunk_id + "' is not pending for annotator '" + annotator + "'");
  }

  Event e{current->events.size() + 1, annotator, chunk_id, label, reason, utc_timestamp()};
  write_all(fd_, event_json(e).dump() + "\n", log_path_);

  auto next = std::make_shared<State>(*current);
  next->done[annotator].insert(chunk_id);
  if (label) {
    ++next->labeled[annotator];
    ++next->label_events;
  } else {
    ++next->skipped[annotator];
  }
  next->events.push_back(e);
  Receipt r{e.seq, next->label_events, annotator, chunk_id, label ? "label" : "skip"};
  {
    std::lock_guard lock(snapshot_mu_);
    state_ = std::move(next);
  }
  return r;
}

std::vector<AnnotationRecord> AnnotationService::records() const {
  const auto state = snapshot();
  std::vector<AnnotationRecord> out;
  for (const Event& e : state->events) {
    if (e.label) out.push_back({e.chunk_id, e.annotator, *e.label, e.timestamp});
  }
  return out;
}

LiveStats AnnotationService::live_stats() const {
  const auto state = snapshot();
  LiveStats s;
  for (const auto& [annotator, q] : queues_) {
    AnnotatorProgress p;
    p.assigned = q.size();
    const auto l = state->labeled.find(annotator);
    const auto k = state->skipped.find(annotator);
    p.labeled = l == state->labeled.end() ? 0 : l->second;
    p.skipped = k == state->skipped.end() ? 0 : k->second;
    p.remaining = p.assigned - p.labeled - p.skipped;
    s.progress[annotator] = p;
  }
  s.overlap_size = overlap_.size();
  s.records = state->label_events;
  s.expected_records = config_.pool.size() + (config_.roster.size() - 1) * overlap_.size();

  std::vector<AnnotationRecord> overlap_records;
  std::map<std::string, std::size_t> per_chunk;
  for (const Event& e : state->events) {
    if (!e.label || !overlap_.count(e.chunk_id)) continue;
    overlap_records.push_back({e.chunk_id, e.annotator, *e.label, e.timestamp});
    ++per_chunk[e.chunk_id];
  }
  for (const auto& [id, n] : per_chunk) {
    if (n >= 2) ++s.overlap_multi_labeled;
    if (n == config_.roster.size()) ++s.overlap_complete;
  }
  if (s.overlap_multi_labeled > 0) {
    try {
      const auto report = agreement_from_annotations(overlap_records, kAllLabels, WeightScheme::kIdentity);
      s.percent_agreement = report.percent_agreement;
      s.gwet_ac1 = report.gwet_ac;
    } catch (const DomainError&) {
      // Degenerate basis; reported as unavailable.
    }
  }
  return s;
}

Json to_json(const LiveStats& s) {
  Json progress = Json::object();
  for (const auto& [a, p] : s.progress) {
    progress[a] = {{"assigned", p.assigned},
                   {"labeled", p.labeled},
                   {"skipped", p.skipped},
                   {"remaining", p.remaining}};
  }
  const bool available = s.percent_agreement.has_value();
  return {{"progress", progress},
          {"overlap",
           {{"size", s.overlap_size},
            {"multi_labeled", s.overlap_multi_labeled},
            {"complete", s.overlap_complete}}},
          {"records", s.records},
          {"expected_records", s.expected_records},
          {"agreement",
           {{"available", available},
            {"percent_agreement", available ? Json(*s.percent_agreement) : Json(nullptr)},
            {"gwet_ac1", s.gwet_ac1 ? Json(*s.gwet_ac1) : Json(nullptr)}}}};
}

TaskExport AnnotationService::export_task() const {
  const auto state = snapshot();
  std::vector<AnnotationRecord> recs;
  std::size_t skips = 0;
  for (const Event& e : state->events) {
    if (e.label) {
      recs.push_back({e.chunk_id, e.annotator, *e.label, e.timestamp});
    } else {
      ++skips;
    }
  }
  std::size_t planned = 0;
  for (const auto& [a, q] : queues_) planned += q.size();
  TaskExport out;
  out.complete = state->events.size() == planned;

  const Json ann_header = {{"task_id", config_.task_id},
                           {"complete", out.complete},
                           {"records", recs.size()},
                           {"skips", skips},
                           {"seed", config_.seed}};
  out.annotations_jsonl = dump_jsonl(ann_header, to_json_records(recs));

  const auto resolved = resolve_all(recs);
  std::vector<Json> labeled;
  Json unresolved = Json::array();
  for (const Chunk& c : config_.pool) {
    const auto it = resolved.find(c.chunk_id);
    if (it == resolved.end()) continue;
    if (it->second.unresolved()) {
      unresolved.push_back(c.chunk_id);
      continue;
    }
    labeled.push_back(to_json(LabeledChunk{c, *it->second.gold, it->second.provenance}));
  }
  const Json lab_header = {{"task_id", config_.task_id},
                           {"complete", out.complete},
                           {"labeled", labeled.size()},
                           {"unresolved", unresolved},
                           {"seed", config_.seed}};
  out.labeled_jsonl = dump_jsonl(lab_header, labeled);
  return out;
}

}  // namespace valence
