#pragma once

#include <cstddef>
#include <functional>

namespace benchtrack {

/// Worker count: BENCHTRACK_THREADS if set (>=1), else hardware concurrency.
std::size_t thread_count();

/// Runs fn(begin, end) over a static partition of [0, n). Work must write to
/// disjoint, pre-sized storage; estimator reductions stay deterministic
/// because per-item outputs are combined by index order afterwards.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace benchtrack
