#pragma once

#include <cstdint>
#include <functional>

#include "berknash/model.hpp"

namespace berknash {

/// Deterministic 64-bit stream mixer used to derive independent seeds.
uint64_t splitmix64(uint64_t& state);

/// Seed for job `index` of the run identified by `base` (an instance hash or
/// a user seed). Stable across platforms and thread counts.
uint64_t derive_seed(uint64_t base, uint64_t index);

/// FNV-1a hash of the model's complete numeric content (names, feasibility,
/// kernels, payoffs, discount, grid). Used to key deterministic seeding.
uint64_t instance_hash(const FiniteMdp& mdp);
uint64_t instance_hash(const FiniteSmdp& smdp);

/// Worker count resolution: BERKNASH_THREADS when set and positive, else the
/// hardware concurrency, else 1.
int default_thread_count();

/// Runs fn(0..n-1) on up to `threads` workers (resolved via
/// default_thread_count() when threads <= 0). Each job writes only to its own
/// output slot, so results are bitwise independent of the worker count.
/// Exceptions are captured and the first one is rethrown after the pool
/// drains.
void run_indexed_jobs(int n, const std::function<void(int)>& fn,
                      int threads = 0);

}  // namespace berknash
