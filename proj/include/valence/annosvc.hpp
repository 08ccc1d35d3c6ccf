#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "valence/agreement.hpp"
#include "valence/dataset.hpp"
#include "valence/error.hpp"
#include "valence/extraction.hpp"
#include "valence/util/jsonl.hpp"

namespace valence {

/// Service-level failures; `status` is the HTTP status the server reports.
class ServiceError : public Error {
 public:
  enum class Kind { kAuth, kConflict, kNotFound };

  ServiceError(Kind kind, const std::string& what) : Error(what, ExitCode::kValidation), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }
  int status() const noexcept;
  std::string_view code() const noexcept;

 private:
  Kind kind_;
};

struct TaskConfig {
  std::string task_id;
  std::vector<Chunk> pool;
  std::vector<std::string> overlap;  // chunk ids labeled by every annotator
  std::vector<std::string> roster;
  std::map<std::string, std::string> tokens;  // annotator -> token; empty disables auth
  std::uint64_t seed = 42;

  /// Throws ValidationError: empty roster, duplicate ids, overlap outside pool.
  void validate() const;
};

struct NextChunk {
  bool done = false;
  std::optional<Chunk> chunk;
  std::size_t position = 0;  // 1-based index in the annotator's queue
  std::size_t total = 0;
  std::size_t completed = 0;
};

struct Receipt {
  std::uint64_t seq = 0;
  std::size_t record_count = 0;  // label events stored so far
  std::string annotator;
  std::string chunk_id;
  std::string kind;  // "label" or "skip"
};

struct AnnotatorProgress {
  std::size_t assigned = 0;
  std::size_t labeled = 0;
  std::size_t skipped = 0;
  std::size_t remaining = 0;
};

struct LiveStats {
  std::map<std::string, AnnotatorProgress> progress;
  std::size_t overlap_size = 0;
  std::size_t overlap_multi_labeled = 0;  // overlap chunks with >= 2 labels
  std::size_t overlap_complete = 0;       // labeled by every annotator
  std::size_t records = 0;
  std::size_t expected_records = 0;
  std::optional<double> percent_agreement;
  std::optional<double> gwet_ac1;
};

Json to_json(const LiveStats& stats);

struct TaskExport {
  std::string annotations_jsonl;
  std::string labeled_jsonl;
  bool complete = false;
};

/// Annotation task backed by an append-only JSONL event log. State is rebuilt
/// from the log on construction; every mutation is appended and synced before
/// it becomes visible. Writers are serialized; readers work on immutable
/// snapshots.
class AnnotationService {
 public:
  AnnotationService(TaskConfig config, std::filesystem::path log_path);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  const TaskConfig& config() const noexcept { return config_; }

  /// ServiceError(kAuth) for an unknown annotator or a wrong token when
  /// tokens are configured.
  void authenticate(const std::string& annotator, const std::string& token) const;
  /// Accepts any roster token.
  void authenticate_any(const std::string& token) const;

  /// Head of the annotator's queue; repeated calls return the same chunk.
  NextChunk next_chunk(const std::string& annotator) const;

  /// ServiceError(kConflict) when the chunk is not pending for the
  /// annotator; ValidationError for a label outside the closed set.
  Receipt submit(const std::string& annotator, const std::string& chunk_id, const std::string& label);
  /// Marks a chunk unjudgeable. Stored as its own event type, never a label.
  Receipt skip(const std::string& annotator, const std::string& chunk_id, const std::string& reason);

  LiveStats live_stats() const;
  TaskExport export_task() const;

  /// Planned queue for an annotator (overlap plus own share, shuffled).
  std::vector<std::string> queue(const std::string& annotator) const;
  std::vector<AnnotationRecord> records() const;

 private:
  struct State;
  std::shared_ptr<const State> snapshot() const;
  Receipt append(const std::string& annotator, const std::string& chunk_id,
                 const std::optional<ValenceLabel>& label, const std::string& reason);
  void replay();

  TaskConfig config_;
  std::filesystem::path log_path_;
  std::map<std::string, std::size_t> chunk_index_;
  std::map<std::string, std::vector<std::string>> queues_;
  std::set<std::string> overlap_;

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const State> state_;
  std::mutex writer_mu_;
  int fd_ = -1;
};

/// Assignment rule: overlap chunks go to every annotator; the remaining pool
/// is shuffled with the task seed and dealt round-robin over the roster. Each
/// queue is then shuffled with a per-annotator seed.
std::map<std::string, std::vector<std::string>> plan_queues(const TaskConfig& config);

}  // namespace valence
