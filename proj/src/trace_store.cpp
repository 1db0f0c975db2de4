#include "tafc/trace_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <map>
#include <mutex>

#include "tafc/error.hpp"

namespace tafc {
namespace {

constexpr const char* kMetaKey = "tafc_trace_store";

[[noreturn]] void throw_errno(const std::string& what) {
  const int err = errno;
  const ErrorCode code = (err == ENOSPC || err == EDQUOT) ? ErrorCode::StorageFull : ErrorCode::IOFailure;
  throw Error(code, what + ": " + std::strerror(err));
}

void write_all(int fd, const std::string& data, const std::string& what) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno(what);
    }
    done += static_cast<std::size_t>(n);
  }
}

void fsync_directory_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "." : (slash == 0 ? "/" : path.substr(0, slash));
  const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Success: return "success";
    case Outcome::ExecutionError: return "execution_error";
    case Outcome::ValidationError: return "validation_error";
    case Outcome::Timeout: return "timeout";
    case Outcome::BudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

Outcome outcome_from_string(std::string_view text) {
  for (Outcome o : {Outcome::Success, Outcome::ExecutionError, Outcome::ValidationError,
                    Outcome::Timeout, Outcome::BudgetExhausted}) {
    if (to_string(o) == text) return o;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown outcome '" + std::string(text) + "'");
}

std::string rfc3339_now() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto secs = time_point_cast<seconds>(now);
  const auto millis = duration_cast<milliseconds>(now - secs).count();
  const std::time_t t = system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(millis));
  return out;
}

Json TraceRecord::to_json() const {
  Json j = Json::object();
  j["id"] = id;
  j["timestamp"] = timestamp;
  j["x"] = x;
  j["function_name"] = function_name;
  j["trace"] = trace.to_json();
  j["parameters"] = parameters;
  j["outcome"] = to_string(outcome);
  return j;
}

TraceRecord TraceRecord::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() || !j.contains("outcome")) {
    throw Error(ErrorCode::InvalidArgument, "not a trace record");
  }
  TraceRecord r;
  try {
    r.id = j["id"].get<std::uint64_t>();
    r.timestamp = j.value("timestamp", std::string());
    r.x = j.value("x", std::string());
    r.function_name = j.value("function_name", std::string());
    if (j.contains("trace")) r.trace = ReasoningTrace::from_json(j["trace"]);
    if (j.contains("parameters")) r.parameters = j["parameters"];
    r.outcome = outcome_from_string(j["outcome"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed trace record: ") + e.what());
  }
  return r;
}

TraceStore::TraceStore() = default;

TraceStore::TraceStore(std::string path, TraceStoreOptions options)
    : path_(std::move(path)), options_(options) {
  if (path_.empty()) return;
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw_errno("open " + path_);
  load();
}

TraceStore::~TraceStore() {
  if (fd_ >= 0) ::close(fd_);
}

void TraceStore::load() {
  std::string content;
  {
    char buf[1 << 16];
    ::lseek(fd_, 0, SEEK_SET);
    for (;;) {
      const ssize_t n = ::read(fd_, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("read " + path_);
      }
      if (n == 0) break;
      content.append(buf, static_cast<std::size_t>(n));
    }
  }

  std::size_t valid_end = 0;
  std::size_t pos = 0;
  std::uint64_t last_id = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    // A line without its newline was never acknowledged.
    if (nl == std::string::npos) break;
    const std::string_view line(content.data() + pos, nl - pos);
    bool ok = true;
    try {
      const Json j = Json::parse(line);
      if (j.is_object() && j.contains(kMetaKey)) {
        const std::uint64_t seq = j[kMetaKey].value("next_id", std::uint64_t{1});
        if (seq > next_id_) next_id_ = seq;
      } else {
        TraceRecord r = TraceRecord::from_json(j);
        if (r.id <= last_id) {
          ok = false;
        } else {
          last_id = r.id;
          records_.push_back(std::move(r));
        }
      }
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) break;
    pos = nl + 1;
    valid_end = pos;
  }
  if (last_id + 1 > next_id_) next_id_ = last_id + 1;

  if (valid_end < content.size()) {
    recovered_bytes_ = content.size() - valid_end;
    if (::ftruncate(fd_, static_cast<off_t>(valid_end)) != 0) throw_errno("truncate " + path_);
    if (options_.fsync) ::fsync(fd_);
  }
}

void TraceStore::write_line(const std::string& line) {
  const off_t before = ::lseek(fd_, 0, SEEK_END);
  try {
    write_all(fd_, line, "append to " + path_);
    if (options_.fsync && ::fsync(fd_) != 0) throw_errno("fsync " + path_);
  } catch (...) {
    // Leave no torn record behind.
    if (before >= 0 && ::ftruncate(fd_, before) != 0) {
      // Nothing more can be done; the next open will discard the tail.
    }
    throw;
  }
}

std::uint64_t TraceStore::append(TraceRecord record) {
  std::unique_lock lock(mutex_);
  if (options_.max_records != 0 && records_.size() >= options_.max_records) {
    throw Error(ErrorCode::StorageFull, "trace store holds " + std::to_string(records_.size()) + " records");
  }
  record.id = next_id_;
  if (record.timestamp.empty()) record.timestamp = rfc3339_now();
  if (fd_ >= 0) write_line(record.to_json().dump() + "\n");
  ++next_id_;
  records_.push_back(std::move(record));
  return records_.back().id;
}

std::optional<TraceRecord> TraceStore::get(std::uint64_t id) const {
  std::shared_lock lock(mutex_);
  auto it = std::lower_bound(records_.begin(), records_.end(), id,
                             [](const TraceRecord& r, std::uint64_t v) { return r.id < v; });
  if (it == records_.end() || it->id != id) return std::nullopt;
  return *it;
}

std::vector<TraceRecord> TraceStore::records() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t TraceStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::uint64_t TraceStore::next_id() const {
  std::shared_lock lock(mutex_);
  return next_id_;
}

void TraceStore::rewrite(const std::vector<TraceRecord>& keep) {
  const std::string tmp = path_ + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + tmp);
  try {
    Json meta = Json::object();
    meta[kMetaKey] = {{"next_id", next_id_}};
    std::string data = meta.dump() + "\n";
    for (const auto& r : keep) data += r.to_json().dump() + "\n";
    write_all(fd, data, "write " + tmp);
    if (::fsync(fd) != 0) throw_errno("fsync " + tmp);
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path_.c_str()) != 0) throw_errno("rename " + tmp);
  fsync_directory_of(path_);

  const int reopened = ::open(path_.c_str(), O_RDWR | O_APPEND | O_CLOEXEC);
  if (reopened < 0) throw_errno("reopen " + path_);
  ::close(fd_);
  fd_ = reopened;
}

std::size_t TraceStore::prune(std::size_t keep_per_function) {
  std::unique_lock lock(mutex_);
  std::map<std::string, std::size_t> seen;
  std::vector<bool> keep_flag(records_.size(), false);
  for (std::size_t i = records_.size(); i-- > 0;) {
    std::size_t& n = seen[records_[i].function_name];
    if (n < keep_per_function) {
      keep_flag[i] = true;
      ++n;
    }
  }
  std::vector<TraceRecord> keep;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (keep_flag[i]) keep.push_back(records_[i]);
  }
  const std::size_t removed = records_.size() - keep.size();
  if (removed == 0) return 0;
  if (fd_ >= 0) rewrite(keep);
  records_ = std::move(keep);
  return removed;
}

std::vector<TrainingTuple> TraceStore::build_training_set(const std::set<Outcome>& outcomes,
                                                          std::string_view function_name) const {
  std::shared_lock lock(mutex_);
  std::vector<TrainingTuple> out;
  for (const auto& r : records_) {
    if (outcomes.count(r.outcome) == 0) continue;
    if (!function_name.empty() && r.function_name != function_name) continue;
    out.push_back(TrainingTuple{r.id, r.x, r.function_name, r.parameters, r.trace});
  }
  return out;
}

}  // namespace tafc
