#pragma once

#include <functional>

namespace genex {

/// Worker count to use for `jobs` <= 0.
int default_jobs();

/// Runs body(0..count-1) on up to `jobs` threads. Indices are handed out in
/// order; callers write results into per-index slots so the outcome does not
/// depend on scheduling. The exception of the lowest failing index is
/// rethrown after all workers finish.
void parallel_for(int count, int jobs, const std::function<void(int)>& body);

}  // namespace genex
