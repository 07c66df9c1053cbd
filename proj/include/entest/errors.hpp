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

#ifndef ENTEST_ERRORS_HPP
#define ENTEST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace entest {

/// Invalid configuration supplied by the caller (bad flags, invalid
/// parameter ranges, malformed experiment specs). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Problems with the data itself (unreadable files, degenerate inputs,
/// rank-deficient matrices beyond tolerance). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical routine failed to converge or left its supported range.
/// Carries whatever diagnostics the failing routine could collect.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A randomly drawn direction or subset is numerically degenerate for the
/// current model. The ensemble layer catches this and resamples.
class DegenerateDrawError : public NumericalError {
 public:
  explicit DegenerateDrawError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace entest

#endif  // ENTEST_ERRORS_HPP
