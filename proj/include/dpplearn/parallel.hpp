// Copyright 2026 The Authors.
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

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dpplearn {

// Per-example fan-out uses fixed chunks of this many items. The grouping of
// partial sums depends only on the item count, never on the thread count, so
// reductions are bit-identical for any --threads value.
inline constexpr std::size_t kReduceChunk = 64;

/// Splits [0, count) into fixed-size chunks, evaluates `per_chunk(begin, end)`
/// for each (possibly on several threads), and folds the per-chunk partials
/// in chunk order with `combine(accumulator, partial)`.
/// Exceptions from workers are rethrown for the lowest-index failing chunk.
template <typename Partial, typename ChunkFn, typename CombineFn>
Partial chunked_reduce(std::size_t count, int threads, Partial init, const ChunkFn& per_chunk,
                       const CombineFn& combine) {
  const std::size_t n_chunks = (count + kReduceChunk - 1) / kReduceChunk;
  std::vector<Partial> partials(n_chunks, init);
  std::vector<std::exception_ptr> errors(n_chunks);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * kReduceChunk;
    const std::size_t end = std::min(count, begin + kReduceChunk);
    try {
      partials[c] = per_chunk(begin, end);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
          run_chunk(c);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t c = 0; c < n_chunks; ++c) {
    if (errors[c]) std::rethrow_exception(errors[c]);
  }
  Partial acc = std::move(init);
  for (std::size_t c = 0; c < n_chunks; ++c) acc = combine(std::move(acc), partials[c]);
  return acc;
}

}  // namespace dpplearn
