#include "dfa/instrumentation.hpp"

#include <atomic>
#include <mutex>
#include <utility>

namespace dfa::instrumentation {

namespace {
std::atomic<bool> g_enabled{false};
std::mutex g_mutex;
std::vector<ParamRead> g_reads;
thread_local int t_reader = 0;
}  // namespace

void set_enabled(bool enabled) { g_enabled.store(enabled); }
bool enabled() { return g_enabled.load(std::memory_order_relaxed); }

void record_param_read(int owner) {
  if (!enabled()) return;
  std::lock_guard lock(g_mutex);
  g_reads.push_back({t_reader, owner});
}

std::vector<ParamRead> take_param_reads() {
  std::lock_guard lock(g_mutex);
  return std::exchange(g_reads, {});
}

ReaderScope::ReaderScope(int reader) : previous_(t_reader) { t_reader = reader; }
ReaderScope::~ReaderScope() { t_reader = previous_; }

int current_reader() { return t_reader; }

}  // namespace dfa::instrumentation
