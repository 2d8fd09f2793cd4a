// Copyright 2026 The dlslab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dlslab/dlslab.hpp"

namespace dlslab::testing {

inline ExecutionContext ctx(std::size_t p, Technique t, Index k = 1) {
  ExecutionContext c;
  c.p = p;
  c.technique = t;
  c.chunk_param = k;
  return c;
}

inline LoopDescriptor loop(Index n, Index steps = 1, std::string id = "L") { return {std::move(id), n, steps}; }

/// True when the chunks cover [0, n) exactly once.
inline bool partitions(std::vector<Chunk> chunks, Index n) {
  std::sort(chunks.begin(), chunks.end(), [](const Chunk& a, const Chunk& b) { return a.start < b.start; });
  Index at = 0;
  for (const auto& c : chunks) {
    if (c.start != at || c.size < 1) return false;
    at = c.end();
  }
  return at == n;
}

inline std::vector<Index> sizes(const std::vector<Chunk>& chunks) {
  std::vector<Index> out;
  for (const auto& c : chunks) out.push_back(c.size);
  return out;
}

inline std::vector<Chunk> sim_chunks(Index n, const ExecutionContext& c, std::vector<double> costs = {},
                                     OverheadModel overhead = {}, SimOptions options = {}) {
  if (costs.empty()) costs.assign(static_cast<std::size_t>(n), 1.0);
  return simulate(loop(n), c, costs, overhead, options).chunks();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dlslab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dlslab::testing
