#include "tafc/budget.hpp"

#include <cmath>

#include "tafc/error.hpp"

namespace tafc {

void Budget::validate() const {
  if (max_tool_calls <= 0) throw Error(ErrorCode::InvalidArgument, "max_tool_calls must be positive");
  if (!(timeout_seconds > 0.0) || !std::isfinite(timeout_seconds)) {
    throw Error(ErrorCode::InvalidArgument, "timeout_seconds must be positive");
  }
}

BudgetLedger::BudgetLedger(int max_tool_calls) : max_(max_tool_calls) {
  if (max_tool_calls <= 0) throw Error(ErrorCode::InvalidArgument, "max_tool_calls must be positive");
}

BudgetDecision BudgetLedger::enforce(const std::string& session) {
  std::lock_guard lock(mutex_);
  int& count = used_[session];
  if (count >= max_) return BudgetDecision::Refusal;
  ++count;
  return BudgetDecision::Permit;
}

bool BudgetLedger::exhausted(const std::string& session) const {
  return used(session) >= max_;
}

int BudgetLedger::used(const std::string& session) const {
  std::lock_guard lock(mutex_);
  auto it = used_.find(session);
  return it == used_.end() ? 0 : it->second;
}

ManualClock::time_point ManualClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void ManualClock::advance(std::chrono::duration<double> by) {
  std::lock_guard lock(mutex_);
  now_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(by);
}

}  // namespace tafc
