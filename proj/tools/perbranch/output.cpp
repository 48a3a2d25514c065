// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/output.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace perbranch::cli {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvFile::CsvFile(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), columns_(header.size()), out_(path) {
  if (!out_) throw ConfigError("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvFile::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw Error("CSV row width mismatch in " + path_.string());
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
}

void RunContext::write_sidecar(const std::filesystem::path& csv, const nlohmann::json& extra) const {
  nlohmann::json j;
  j["tool"] = "perbranch";
  j["version"] = "0.1.0";
  j["command"] = command;
  j["output"] = csv.filename().string();
  if (media) {
    j["media_hash"] = media->hash();
    j["media"] = media->canonical();
  }
  j["parameters"] = parameters;
  j["argv"] = argv;
  if (!extra.empty()) j["summary"] = extra;
  std::filesystem::path side = csv;
  side.replace_extension(".json");
  std::ofstream out(side);
  if (!out) throw ConfigError("cannot write " + side.string());
  out << j.dump(2) << '\n';
}

Vec parse_vector(const std::string& token, int dim, const char* what) {
  std::vector<double> parts;
  std::stringstream ss(token);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError(std::string("cannot parse ") + what + " component '" + item + "'");
    parts.push_back(v);
  }
  if (static_cast<int>(parts.size()) != dim)
    throw ConfigError(std::string(what) + " '" + token + "' needs " + std::to_string(dim) + " components");
  return Eigen::Map<const Vec>(parts.data(), dim);
}

std::vector<Vec> parse_vectors(const std::vector<std::string>& tokens, int dim, const char* what) {
  std::vector<Vec> out;
  for (const auto& token : tokens) {
    std::string t = token;
    for (char& c : t)
      if (c == ';' || c == ' ' || c == '\t' || (dim == 1 && c == ',')) c = '\n';
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item))
      if (!item.empty()) out.push_back(parse_vector(item, dim, what));
  }
  return out;
}

std::vector<double> parse_scalars(const std::vector<std::string>& tokens, const char* what) {
  std::vector<double> out;
  for (const auto& v : parse_vectors(tokens, 1, what)) out.push_back(v[0]);
  return out;
}

std::vector<Vec> parse_range(const std::string& text, int dim, const char* what) {
  double lo = 0.0, hi = 0.0;
  long count = 0;
  char c1 = 0, c2 = 0;
  std::stringstream ss(text);
  if (!(ss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 || (count > 1 && !(hi > lo)))
    throw ConfigError(std::string(what) + " range '" + text + "' must read lo:hi:count with lo < hi");
  std::vector<double> axis;
  for (long i = 0; i < count; ++i) axis.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1));
  std::vector<Vec> out;
  if (dim == 1) {
    for (double a : axis) out.push_back(Vec::Constant(1, a));
  } else {
    for (double b : axis)
      for (double a : axis) {
        Vec v(2);
        v << a, b;
        out.push_back(v);
      }
  }
  return out;
}

nlohmann::json to_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

nlohmann::json to_json(const Mat& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(row);
  }
  return j;
}

}  // namespace perbranch::cli
