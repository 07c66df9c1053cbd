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

#ifndef ENTEST_IO_HPP
#define ENTEST_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "entest/linalg.hpp"

namespace entest::io {

/// Tab-separated numeric matrix. Parse failures throw DataError with
/// line/column diagnostics.
struct TsvMatrix {
  linalg::Matrix values;
  std::vector<std::string> header;  // empty when has_header is false
};

TsvMatrix read_tsv_matrix(const std::string& path, bool has_header);

/// Single-column (or single-row) TSV as a vector.
std::vector<double> read_tsv_vector(const std::string& path, bool has_header);

/// JSON score input: {"S": [...], "Sigma": [[...], ...], "n": int}.
struct ScoreFile {
  std::vector<double> s;
  linalg::Matrix sigma;
  std::size_t n = 0;
};

ScoreFile read_score_json(const std::string& path);
void write_score_json(const std::string& path, const ScoreFile& f);

/// FNV-1a fingerprint of a canonical JSON dump, hex-encoded; embedded in CLI
/// records and experiment sidecars.
std::string hash_hex(const std::string& bytes);

}  // namespace entest::io

#endif  // ENTEST_IO_HPP
