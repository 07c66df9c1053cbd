// Copyright 2026-present the entest project
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

#ifndef ENTEST_PARALLEL_HPP
#define ENTEST_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace entest::parallel {

/// ENTEST_THREADS environment override, else hardware concurrency.
int default_threads();

/// Runs fn(i) for i in [begin, end) across `threads` workers. Work items are
/// claimed through an atomic cursor, so scheduling is nondeterministic, but
/// callers only ever write to per-index slots; reductions happen afterwards
/// in index order. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t begin, std::size_t end, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace entest::parallel

#endif  // ENTEST_PARALLEL_HPP
