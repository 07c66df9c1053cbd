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

#include "entest/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "entest/errors.hpp"
#include "entest/rng.hpp"

namespace entest::io {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_cell(const std::string& cell, const std::string& path,
                  std::size_t line_no, std::size_t col_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw DataError(path + ": line " + std::to_string(line_no) + ", column " +
                    std::to_string(col_no) + ": cannot parse '" + cell +
                    "' as a number");
  }
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

TsvMatrix read_tsv_matrix(const std::string& path, bool has_header) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": file is empty");

  TsvMatrix out;
  std::size_t first_row = 0;
  if (has_header) {
    out.header = split_tabs(lines[0]);
    first_row = 1;
    if (lines.size() == 1) throw DataError(path + ": no data rows after header");
  }
  const std::size_t cols = split_tabs(lines[first_row]).size();
  const std::size_t rows = lines.size() - first_row;
  out.values = linalg::Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t line_no = first_row + r + 1;
    const std::vector<std::string> cells = split_tabs(lines[first_row + r]);
    if (cells.size() != cols) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(cols) + " columns, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out.values(r, c) = parse_cell(cells[c], path, line_no, c + 1);
    }
  }
  return out;
}

std::vector<double> read_tsv_vector(const std::string& path, bool has_header) {
  const TsvMatrix m = read_tsv_matrix(path, has_header);
  std::vector<double> v;
  if (m.values.cols() == 1) {
    v.resize(m.values.rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.values(i, 0);
  } else if (m.values.rows() == 1) {
    v.resize(m.values.cols());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.values(0, i);
  } else {
    throw DataError(path + ": expected a single row or column");
  }
  return v;
}

ScoreFile read_score_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!j.contains("S") || !j.contains("Sigma") || !j.contains("n")) {
    throw DataError(path + ": score file needs fields S, Sigma, n");
  }
  ScoreFile f;
  try {
    f.s = j.at("S").get<std::vector<double>>();
    const auto rows = j.at("Sigma").get<std::vector<std::vector<double>>>();
    const std::size_t p = rows.size();
    f.sigma = linalg::Matrix(p, p);
    for (std::size_t i = 0; i < p; ++i) {
      if (rows[i].size() != p) {
        throw DataError(path + ": Sigma row " + std::to_string(i + 1) +
                        " has length " + std::to_string(rows[i].size()) +
                        ", expected " + std::to_string(p));
      }
      for (std::size_t k = 0; k < p; ++k) f.sigma(i, k) = rows[i][k];
    }
    f.n = j.at("n").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (f.s.size() != f.sigma.rows()) {
    throw DataError(path + ": S has length " + std::to_string(f.s.size()) +
                    " but Sigma is " + std::to_string(f.sigma.rows()) + "x" +
                    std::to_string(f.sigma.cols()));
  }
  return f;
}

void write_score_json(const std::string& path, const ScoreFile& f) {
  nlohmann::json j;
  j["S"] = f.s;
  std::vector<std::vector<double>> rows(f.sigma.rows());
  for (std::size_t i = 0; i < f.sigma.rows(); ++i) {
    rows[i].assign(f.sigma.row(i), f.sigma.row(i) + f.sigma.cols());
  }
  j["Sigma"] = rows;
  j["n"] = f.n;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed to write '" + path + "'");
}

std::string hash_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(rng::fnv1a64(bytes)));
  return buf;
}

}  // namespace entest::io
