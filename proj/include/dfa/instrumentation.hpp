#pragma once

#include <vector>

// Parameter-access log used to demonstrate backward unlocking: every read of a
// layer's parameters made on behalf of some layer's update is recorded as
// (reader, owner). Disabled by default; recording then costs one relaxed load.
namespace dfa::instrumentation {

struct ParamRead {
  int reader;  // layer whose update is being computed (0 = none declared)
  int owner;   // layer whose parameters were read
};

void set_enabled(bool enabled);
bool enabled();

void record_param_read(int owner);
std::vector<ParamRead> take_param_reads();

/// Declares, for the current thread, which layer's update the enclosed work serves.
class ReaderScope {
 public:
  explicit ReaderScope(int reader);
  ~ReaderScope();
  ReaderScope(const ReaderScope&) = delete;
  ReaderScope& operator=(const ReaderScope&) = delete;

 private:
  int previous_;
};

int current_reader();

}  // namespace dfa::instrumentation
