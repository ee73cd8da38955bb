#pragma once

#include <cstddef>
#include <functional>

namespace polymoe {

// Process-wide worker count used by parallel_for. Numerical results never
// depend on it: jobs are independent and write to preassigned slots, and all
// reductions run over slots in index order.
int thread_count();
void set_thread_count(int n);  // n >= 1; n == 0 picks hardware concurrency

// Runs fn(job) for job in [0, n_jobs). Jobs are distributed over workers by
// a fixed stride; the first exception thrown by any job is rethrown.
void parallel_for(std::size_t n_jobs, const std::function<void(std::size_t)>& fn);

}  // namespace polymoe
