#pragma once

#include <cstddef>
#include <functional>

namespace fcvqkd {

/// Worker count: hardware concurrency capped by FADING_CVQKD_THREADS.
unsigned worker_count();

/// Runs body(i) for i in [0, count). Each index is handled by exactly one
/// worker; callers write into per-index slots so results do not depend on
/// scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace fcvqkd
