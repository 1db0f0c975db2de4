#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tafc/filter.hpp"
#include "tafc/json.hpp"

namespace tafc {

enum class Outcome { Success, ExecutionError, ValidationError, Timeout, BudgetExhausted };

std::string_view to_string(Outcome outcome);
/// Throws Error(InvalidArgument) for anything but the five enum spellings.
Outcome outcome_from_string(std::string_view text);

struct TraceRecord {
  std::uint64_t id = 0;
  /// RFC 3339, UTC.
  std::string timestamp;
  std::string x;
  std::string function_name;
  ReasoningTrace trace;
  Json parameters = Json::object();
  Outcome outcome = Outcome::Success;

  Json to_json() const;
  static TraceRecord from_json(const Json& j);
};

/// One (x, f, theta, r) element of a training set.
struct TrainingTuple {
  std::uint64_t id = 0;
  std::string x;
  std::string function_name;
  Json theta;
  ReasoningTrace r;
};

struct TraceStoreOptions {
  bool fsync = true;
  /// 0 means unbounded; otherwise appends beyond this many records fail with
  /// StorageFull.
  std::size_t max_records = 0;
};

inline constexpr std::size_t kDefaultPruneKeep = 10000;

std::string rfc3339_now();

/// Append-only reasoning repository backed by a JSONL file (one record per
/// line) or held in memory. Appends go through a single writer; readers see the
/// durable prefix.
class TraceStore {
 public:
  /// In-memory store.
  TraceStore();
  /// Opens or creates `path`. A torn or corrupt tail left by a crash is cut
  /// off so the file holds a valid prefix of the append sequence.
  explicit TraceStore(std::string path, TraceStoreOptions options = {});
  ~TraceStore();

  TraceStore(const TraceStore&) = delete;
  TraceStore& operator=(const TraceStore&) = delete;

  /// Assigns the next id (and a timestamp when empty), persists the record and
  /// returns the id. Throws Error(StorageFull) or Error(IOFailure).
  std::uint64_t append(TraceRecord record);

  std::optional<TraceRecord> get(std::uint64_t id) const;
  std::vector<TraceRecord> records() const;
  std::size_t size() const;
  std::uint64_t next_id() const;
  const std::string& path() const { return path_; }
  /// Bytes discarded from a torn tail when the file was opened.
  std::size_t recovered_bytes() const { return recovered_bytes_; }

  /// Keeps the `keep_per_function` most recent records of each function and
  /// returns how many were removed. Ids are never reused afterwards.
  std::size_t prune(std::size_t keep_per_function);

  /// Records whose outcome is in `outcomes`, in id order; an empty
  /// `function_name` matches every function.
  std::vector<TrainingTuple> build_training_set(const std::set<Outcome>& outcomes,
                                                std::string_view function_name = "") const;

 private:
  void load();
  void write_line(const std::string& line);
  void rewrite(const std::vector<TraceRecord>& keep);

  std::string path_;
  TraceStoreOptions options_;
  int fd_ = -1;
  mutable std::shared_mutex mutex_;
  std::vector<TraceRecord> records_;
  std::uint64_t next_id_ = 1;
  std::size_t recovered_bytes_ = 0;
};

}  // namespace tafc
