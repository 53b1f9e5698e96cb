#include "mrot/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace mrot {
namespace {

std::mutex sink_mutex;
WarningSink current_sink;

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  if (current_sink) {
    current_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

ScopedWarningSink::ScopedWarningSink(WarningSink sink) {
  std::lock_guard lock(sink_mutex);
  previous_ = std::exchange(current_sink, std::move(sink));
}

ScopedWarningSink::~ScopedWarningSink() {
  std::lock_guard lock(sink_mutex);
  current_sink = std::move(previous_);
}

}  // namespace mrot
