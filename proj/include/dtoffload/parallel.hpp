// Copyright 2026 The dtoffload Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DTOFFLOAD_PARALLEL_HPP_
#define DTOFFLOAD_PARALLEL_HPP_

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace dtoff {

// Runs fn(i) for i in [0, count) on at most `threads` workers, contiguous
// chunks per worker. Results must not depend on scheduling: callers write to
// per-index slots and reduce in index order afterwards.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const int lo = static_cast<int>(static_cast<long long>(count) * t / threads);
    const int hi = static_cast<int>(static_cast<long long>(count) * (t + 1) / threads);
    pool.emplace_back([&, t, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace dtoff

#endif  // DTOFFLOAD_PARALLEL_HPP_
