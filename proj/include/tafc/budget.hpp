#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <unordered_map>

namespace tafc {

/// Per-session execution budget.
struct Budget {
  int max_tool_calls = 10;
  /// Per upstream call, in seconds.
  double timeout_seconds = 30.0;

  /// Throws Error(InvalidArgument) unless both are strictly positive.
  void validate() const;
};

enum class BudgetDecision { Permit, Refusal };

/// Tool-call counters keyed by session id. Check-and-increment is atomic.
class BudgetLedger {
 public:
  explicit BudgetLedger(int max_tool_calls = 10);

  /// Permits iff the session has used fewer than max_tool_calls calls, and
  /// counts the permitted call. Unknown sessions start at zero.
  BudgetDecision enforce(const std::string& session);
  bool exhausted(const std::string& session) const;
  int used(const std::string& session) const;
  int max_tool_calls() const { return max_; }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, int> used_;
  int max_;
};

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
};

/// Test clock advanced by hand.
class ManualClock final : public Clock {
 public:
  time_point now() override;
  void advance(std::chrono::duration<double> by);

 private:
  std::mutex mutex_;
  time_point now_{};
};

}  // namespace tafc
