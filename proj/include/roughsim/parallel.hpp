#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace roughsim {

/// Worker count: ROUGHSIM_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls fn(i, worker) for every i in [0, n). Indices are handed out from a
/// shared atomic counter; the first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t i, std::size_t worker)>& fn,
                  std::size_t workers = 0);

/// Pairwise (tree) sum; the result depends only on the order of `values`.
double pairwise_sum(std::span<const double> values);

struct MeanSe {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean, standard deviation (n - 1 denominator) and standard error,
/// each reduced pairwise.
MeanSe mean_se(std::span<const double> values);

}  // namespace roughsim
