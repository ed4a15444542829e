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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpplearn/datasets.hpp"
#include "dpplearn/kernel.hpp"
#include "dpplearn/learning.hpp"

namespace dpplearn {

using json = nlohmann::json;

/// Formats a double with 17 significant digits (lossless round trip).
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

inline std::string join_doubles(const double* data, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ", ";
    out += fmt_double(data[i]);
  }
  return out;
}

}  // namespace detail

// --- Kernel files -----------------------------------------------------------
//
// A kernel file is a JSON document:
//   {"n": N, "eigenvalues": [..N..], "eigenvectors": [..N*N.., row-major],
//    "meta": { free-form }}
// Writers emit every value with 17 significant digits.

inline std::string kernel_to_string(const SpectralKernel& k, const json& meta = json::object()) {
  const Eigen::Index n = k.size();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = k.eigenvectors();
  std::string out = "{\n";
  out += "  \"n\": " + std::to_string(n) + ",\n";
  out += "  \"eigenvalues\": [" +
         detail::join_doubles(k.eigenvalues().data(), static_cast<std::size_t>(n)) + "],\n";
  out += "  \"eigenvectors\": [" +
         detail::join_doubles(rows.data(), static_cast<std::size_t>(n * n)) + "],\n";
  out += "  \"meta\": " + meta.dump() + "\n";
  out += "}\n";
  return out;
}

inline void save_kernel(const std::string& path, const SpectralKernel& k,
                        const json& meta = json::object()) {
  detail::write_file(path, kernel_to_string(k, meta));
}

inline SpectralKernel kernel_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("n") || !doc.contains("eigenvalues") ||
      !doc.contains("eigenvectors")) {
    throw std::runtime_error("kernel file: expected fields n, eigenvalues, eigenvectors");
  }
  const Eigen::Index n = doc.at("n").get<Eigen::Index>();
  const auto& vals = doc.at("eigenvalues");
  const auto& vecs = doc.at("eigenvectors");
  if (n < 1 || static_cast<Eigen::Index>(vals.size()) != n ||
      static_cast<Eigen::Index>(vecs.size()) != n * n) {
    throw std::runtime_error("kernel file: inconsistent dimensions");
  }
  Vector lam(n);
  for (Eigen::Index i = 0; i < n; ++i) lam(i) = vals.at(i).get<double>();
  Matrix v(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) v(i, j) = vecs.at(i * n + j).get<double>();
  }
  return SpectralKernel(std::move(v), std::move(lam));
}

inline SpectralKernel load_kernel(const std::string& path) {
  json doc;
  try {
    doc = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("kernel file " + path + ": " + e.what());
  }
  try {
    return kernel_from_json(doc);
  } catch (const std::exception& e) {
    throw std::runtime_error("kernel file " + path + ": " + e.what());
  }
}

// --- Dataset files ----------------------------------------------------------
//
// JSON lines: a header object {"n": N, "catalog": "relative/path"} followed
// by one {"items": [..]} object per example. Item ids are 1-based in files.
// The catalog file, when referenced, is a JSON object mapping 1-based id
// strings to display names.

inline void save_dataset(const SubsetDataset& d, const std::string& path) {
  std::string out = "{\"n\": " + std::to_string(d.ground_size());
  std::string catalog_path;
  if (!d.catalog().empty()) {
    catalog_path = std::filesystem::path(path).filename().string() + ".catalog.json";
    out += ", \"catalog\": " + json(catalog_path).dump();
  }
  out += "}\n";
  for (const Subset& y : d.examples()) {
    out += "{\"items\": [";
    const auto& items = y.items();
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(items[i] + 1);
    }
    out += "]}\n";
  }
  detail::write_file(path, out);
  if (!catalog_path.empty()) {
    json cat = json::object();
    for (const auto& [id, name] : d.catalog()) cat[std::to_string(id + 1)] = name;
    detail::write_file((std::filesystem::path(path).parent_path() / catalog_path).string(),
                       cat.dump(2) + "\n");
  }
}

inline SubsetDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  int line_no = 0;
  int n = 0;
  std::map<int, std::string> catalog;

  auto fail = [&](const std::string& msg) -> std::runtime_error {
    return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  // Header line.
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json header;
    try {
      header = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed header: ") + e.what());
    }
    if (!header.is_object() || !header.contains("n")) {
      throw fail("header must carry the ground-set size n");
    }
    n = header.at("n").get<int>();
    if (n < 1) throw fail("ground-set size must be >= 1");
    if (header.contains("catalog")) {
      const std::filesystem::path cat_path =
          std::filesystem::path(path).parent_path() / header.at("catalog").get<std::string>();
      json cat;
      try {
        cat = json::parse(detail::read_file(cat_path.string()));
      } catch (const std::exception& e) {
        throw fail(std::string("catalog: ") + e.what());
      }
      for (const auto& [key, value] : cat.items()) {
        const int id = std::stoi(key);
        if (id < 1 || id > n) throw fail("catalog id " + key + " out of range");
        catalog[id - 1] = value.get<std::string>();
      }
    }
    break;
  }
  if (n == 0) throw std::runtime_error(path + ": missing header line");

  std::vector<Subset> examples;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed line: ") + e.what());
    }
    if (!row.is_object() || !row.contains("items") || !row.at("items").is_array()) {
      throw fail("expected an object with an items array");
    }
    std::vector<int> items;
    for (const auto& v : row.at("items")) {
      const int id = v.get<int>();
      if (id < 1 || id > n) throw fail("item id " + std::to_string(id) + " out of range [1, " +
                                       std::to_string(n) + "]");
      items.push_back(id - 1);
    }
    try {
      examples.push_back(Subset(std::move(items)));
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
  }
  return SubsetDataset(n, std::move(examples), std::move(catalog));
}

// --- Train reports ----------------------------------------------------------

inline std::string report_to_string(const TrainReport& r, const json& kernel_meta = json::object()) {
  std::string out = "{\n";
  out += "  \"algorithm\": " + json(r.algorithm).dump() + ",\n";
  out += "  \"converged\": " + std::string(r.converged ? "true" : "false") + ",\n";
  out += "  \"stop_reason\": " + json(r.stop_reason).dump() + ",\n";
  out += "  \"iterations\": " + std::to_string(r.iterations) + ",\n";
  out += "  \"initial_log_likelihood\": " + fmt_double(r.initial_log_likelihood) + ",\n";
  out += "  \"final_log_likelihood\": " + fmt_double(r.final_log_likelihood) + ",\n";
  out += "  \"total_millis\": " + fmt_double(r.total_millis) + ",\n";
  out += "  \"trace\": [";
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const IterationStat& s = r.trace[i];
    if (i) out += ",";
    out += "\n    {\"iter\": " + std::to_string(s.iter) +
           ", \"log_likelihood\": " + fmt_double(s.log_likelihood) +
           ", \"eta\": " + fmt_double(s.eta) + ", \"halvings\": " + std::to_string(s.halvings) +
           ", \"millis\": " + fmt_double(s.millis) + "}";
  }
  out += r.trace.empty() ? "],\n" : "\n  ],\n";
  out += "  \"final_kernel\": ";
  if (r.final_kernel.has_value()) {
    std::string kernel = kernel_to_string(*r.final_kernel, kernel_meta);
    if (!kernel.empty() && kernel.back() == '\n') kernel.pop_back();
    out += kernel;
  } else {
    out += "null";
  }
  out += "\n}\n";
  return out;
}

inline void save_report(const std::string& path, const TrainReport& r,
                        const json& kernel_meta = json::object()) {
  detail::write_file(path, report_to_string(r, kernel_meta));
}

// --- CSV --------------------------------------------------------------------

/// Minimal CSV emitter: UTF-8, comma separators, one header row, doubles
/// formatted with 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    append_row(header);
  }

  void add(const std::string& v) { row_.push_back(escape(v)); maybe_flush(); }
  void add(double v) { row_.push_back(fmt_double(v)); maybe_flush(); }
  void add(std::int64_t v) { row_.push_back(std::to_string(v)); maybe_flush(); }
  void add(int v) { add(static_cast<std::int64_t>(v)); }

  const std::string& str() const { return out_; }

  void save(const std::string& path) const {
    if (!row_.empty()) throw std::logic_error("CsvWriter: unfinished row");
    detail::write_file(path, out_);
  }

 private:
  static std::string escape(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string quoted = "\"";
    for (char c : v) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    return quoted + "\"";
  }

  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += escape(cells[i]);
    }
    out_ += '\n';
  }

  void maybe_flush() {
    if (row_.size() == columns_) {
      for (std::size_t i = 0; i < row_.size(); ++i) {
        if (i) out_ += ',';
        out_ += row_[i];
      }
      out_ += '\n';
      row_.clear();
    }
  }

  std::size_t columns_;
  std::vector<std::string> row_;
  std::string out_;
};

}  // namespace dpplearn
