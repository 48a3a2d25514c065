// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perbranch/common.hpp"
#include "perbranch/periodic_media.hpp"

namespace perbranch::cli {

/// Shortest round-trip decimal form of a double.
std::string num(double x);

/// CSV writer with a fixed header; every emitted file gets a JSON sidecar
/// (same stem, .json) with the media hash and the parameter echo.
class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, std::vector<std::string> header);

  void row(const std::vector<std::string>& cells);
  const std::filesystem::path& path() const { return path_; }
  void close() { out_.close(); }

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
};

struct RunContext {
  std::string command;
  MediaPtr media;
  std::filesystem::path out_dir;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::string> argv;

  std::filesystem::path file(const std::string& name) const { return out_dir / name; }
  void write_sidecar(const std::filesystem::path& csv, const nlohmann::json& extra = nlohmann::json::object()) const;
};

/// Vectors given as "a" or "a,b" items separated by ';' or whitespace. In
/// d = 1 commas also separate items.
std::vector<Vec> parse_vectors(const std::vector<std::string>& tokens, int dim, const char* what);
Vec parse_vector(const std::string& token, int dim, const char* what);
std::vector<double> parse_scalars(const std::vector<std::string>& tokens, const char* what);
/// "lo:hi:count" as a tensor grid of points in d dimensions.
std::vector<Vec> parse_range(const std::string& text, int dim, const char* what);

nlohmann::json to_json(const Vec& v);
nlohmann::json to_json(const Mat& m);

}  // namespace perbranch::cli
