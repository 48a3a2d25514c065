// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/periodic_media.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace perbranch {

using nlohmann::json;

namespace {

double reduce(double x) { return x - std::floor(x); }

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  if (x.size() == 1) {
    os << x[0];
  } else {
    os << "(" << x[0] << ", " << x[1] << ")";
  }
  return os.str();
}

}  // namespace

TrigSeries::TrigSeries(int dim, double constant, std::vector<TrigTerm> terms)
    : dim_(dim), constant_(constant), terms_(std::move(terms)) {
  if (dim != 1 && dim != 2) throw ConfigError("series dimension must be 1 or 2");
  for (auto& t : terms_) {
    if (dim == 1) t.wave[1] = 0;
  }
}

bool TrigSeries::is_constant() const {
  for (const auto& t : terms_) {
    if ((t.wave[0] != 0 || t.wave[1] != 0) && (t.cos_amp != 0.0 || t.sin_amp != 0.0)) return false;
  }
  return true;
}

int TrigSeries::max_wave_number() const {
  int m = 0;
  for (const auto& t : terms_) m = std::max({m, std::abs(t.wave[0]), std::abs(t.wave[1])});
  return m;
}

double TrigSeries::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw DomainError("point dimension does not match series");
  const double x0 = reduce(x[0]);
  const double x1 = dim_ == 2 ? reduce(x[1]) : 0.0;
  double acc = constant_;
  for (const auto& t : terms_) {
    const double phase = 2.0 * std::numbers::pi * (t.wave[0] * x0 + t.wave[1] * x1);
    if (t.cos_amp != 0.0) acc += t.cos_amp * std::cos(phase);
    if (t.sin_amp != 0.0) acc += t.sin_amp * std::sin(phase);
  }
  return acc;
}

double TrigSeries::at(double x) const {
  const double p[1] = {x};
  return (*this)(std::span<const double>(p, 1));
}

double TrigSeries::at(double x, double y) const {
  const double p[2] = {x, y};
  return (*this)(std::span<const double>(p, 2));
}

json TrigSeries::to_json() const {
  json terms = json::array();
  for (const auto& t : terms_) {
    json k = json::array();
    for (int j = 0; j < dim_; ++j) k.push_back(t.wave[static_cast<size_t>(j)]);
    terms.push_back({{"k", k}, {"cos", t.cos_amp}, {"sin", t.sin_amp}});
  }
  return {{"const", constant_}, {"terms", terms}};
}

TrigSeries TrigSeries::from_json(const json& node, int dim) {
  if (node.is_number()) return TrigSeries(dim, node.get<double>());
  if (!node.is_object()) throw ConfigError("series must be a number or an object with const/terms");
  double c = 0.0;
  if (node.contains("const")) {
    if (!node["const"].is_number()) throw ConfigError("series 'const' must be a number");
    c = node["const"].get<double>();
  }
  std::vector<TrigTerm> terms;
  if (node.contains("terms")) {
    if (!node["terms"].is_array()) throw ConfigError("series 'terms' must be an array");
    for (const auto& tj : node["terms"]) {
      if (!tj.is_object() || !tj.contains("k")) throw ConfigError("series term needs a wave vector 'k'");
      TrigTerm term;
      const auto& k = tj["k"];
      if (k.is_number_integer()) {
        if (dim != 1) throw ConfigError("wave vector must have 2 entries in dimension 2");
        term.wave[0] = k.get<int>();
      } else if (k.is_array() && static_cast<int>(k.size()) == dim) {
        for (int j = 0; j < dim; ++j) {
          if (!k[static_cast<size_t>(j)].is_number_integer()) throw ConfigError("wave vector entries must be integers");
          term.wave[static_cast<size_t>(j)] = k[static_cast<size_t>(j)].get<int>();
        }
      } else {
        throw ConfigError("wave vector 'k' must have " + std::to_string(dim) + " integer entries");
      }
      for (const char* key : {"cos", "sin"}) {
        if (tj.contains(key) && !tj[key].is_number()) throw ConfigError(std::string("series '") + key + "' must be a number");
      }
      term.cos_amp = tj.value("cos", 0.0);
      term.sin_amp = tj.value("sin", 0.0);
      terms.push_back(term);
    }
  }
  return TrigSeries(dim, c, std::move(terms));
}

bool operator==(const TrigSeries& lhs, const TrigSeries& rhs) {
  if (lhs.dim_ != rhs.dim_ || lhs.constant_ != rhs.constant_ || lhs.terms_.size() != rhs.terms_.size()) return false;
  for (size_t i = 0; i < lhs.terms_.size(); ++i) {
    const auto& a = lhs.terms_[i];
    const auto& b = rhs.terms_[i];
    if (a.wave != b.wave || a.cos_amp != b.cos_amp || a.sin_amp != b.sin_amp) return false;
  }
  return true;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

MediaSpec::MediaSpec(int dim, std::vector<TrigSeries> diffusion, std::vector<TrigSeries> drift,
                     TrigSeries branching, TrigSeries killing, int probe_nodes)
    : dim_(dim), a_(std::move(diffusion)), b_(std::move(drift)),
      alpha_(std::move(branching)), beta_(std::move(killing)) {
  if (dim != 1 && dim != 2) throw ConfigError("dimension must be 1 or 2 (got " + std::to_string(dim) + ")");
  if (static_cast<int>(a_.size()) != dim * dim) throw ConfigError("diffusion matrix must be dim x dim");
  if (static_cast<int>(b_.size()) != dim) throw ConfigError("drift must have dim components");
  auto check_dim = [dim](const TrigSeries& s, const char* what) {
    if (s.dim() != dim) throw ConfigError(std::string(what) + " series has the wrong dimension");
  };
  for (const auto& s : a_) check_dim(s, "diffusion");
  for (const auto& s : b_) check_dim(s, "drift");
  check_dim(alpha_, "alpha");
  check_dim(beta_, "beta");
  if (dim == 2 && !(a_[1] == a_[2])) throw ConfigError("diffusion matrix must be symmetric (a12 != a21)");

  // Report the worst node of each check, not the first offending one.
  const TorusGrid probe(dim, probe_nodes);
  double min_alpha = INFINITY, min_beta = INFINITY, min_eig = INFINITY;
  Index at_alpha = 0, at_beta = 0, at_eig = 0;
  for (Index node = 0; node < probe.size(); ++node) {
    const auto c = probe.coords(node);
    const std::span<const double> x(c.data(), static_cast<size_t>(dim));
    const double al = alpha_(x);
    if (al < min_alpha) min_alpha = al, at_alpha = node;
    const double be = beta_(x);
    if (be < min_beta) min_beta = be, at_beta = node;
    const Mat a = diffusion_at(x);
    const double ev = dim == 1 ? a(0, 0) : Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvalues().minCoeff();
    if (!(ev >= min_eig)) min_eig = ev, at_eig = node;
  }
  auto fail = [&](const char* what, Index node, double value) {
    const auto c = probe.coords(node);
    std::ostringstream os;
    os << what << " at x=" << format_point(std::span<const double>(c.data(), static_cast<size_t>(dim)))
       << " (value " << value << ")";
    throw ConfigError(os.str());
  };
  if (min_alpha < -1e-14) fail("alpha negative", at_alpha, min_alpha);
  if (min_beta < -1e-14) fail("beta negative", at_beta, min_beta);
  if (!(min_eig > 0.0)) fail("diffusion matrix not positive definite (smallest eigenvalue)", at_eig, min_eig);

  json a_json = json::array();
  for (int i = 0; i < dim; ++i) {
    json row = json::array();
    for (int j = 0; j < dim; ++j) row.push_back(this->diffusion(i, j).to_json());
    a_json.push_back(row);
  }
  json b_json = json::array();
  for (const auto& s : b_) b_json.push_back(s.to_json());
  canonical_ = {{"dimension", dim}, {"a", a_json}, {"b", b_json},
                {"alpha", alpha_.to_json()}, {"beta", beta_.to_json()}};
  hash_ = fnv1a_hex(canonical_.dump());
}

Mat MediaSpec::diffusion_at(std::span<const double> x) const {
  Mat a(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) a(i, j) = diffusion(i, j)(x);
  return a;
}

Vec MediaSpec::drift_at(std::span<const double> x) const {
  Vec b(dim_);
  for (int i = 0; i < dim_; ++i) b(i) = drift(i)(x);
  return b;
}

double MediaSpec::potential_at(std::span<const double> x) const { return alpha_(x) - beta_(x); }

int MediaSpec::max_wave_number() const {
  int m = std::max(alpha_.max_wave_number(), beta_.max_wave_number());
  for (const auto& s : a_) m = std::max(m, s.max_wave_number());
  for (const auto& s : b_) m = std::max(m, s.max_wave_number());
  return m;
}

bool MediaSpec::is_constant() const {
  bool c = alpha_.is_constant() && beta_.is_constant();
  for (const auto& s : a_) c = c && s.is_constant();
  for (const auto& s : b_) c = c && s.is_constant();
  return c;
}

MediaPtr media_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("media document must be a JSON object");
  if (!doc.contains("dimension") || !doc["dimension"].is_number_integer()) {
    throw ConfigError("media document needs an integer 'dimension'");
  }
  const int dim = doc["dimension"].get<int>();
  if (dim != 1 && dim != 2) throw ConfigError("dimension must be 1 or 2 (got " + std::to_string(dim) + ")");
  if (!doc.contains("a")) throw ConfigError("media document needs a diffusion matrix 'a'");
  if (!doc.contains("alpha")) throw ConfigError("media document needs a branching rate 'alpha'");

  std::vector<TrigSeries> a;
  const auto& aj = doc["a"];
  if (dim == 1 && !aj.is_array()) {
    a.push_back(TrigSeries::from_json(aj, 1));
  } else {
    if (!aj.is_array() || static_cast<int>(aj.size()) != dim) throw ConfigError("'a' must be a dim x dim array");
    for (const auto& row : aj) {
      if (!row.is_array() || static_cast<int>(row.size()) != dim) throw ConfigError("'a' must be a dim x dim array");
      for (const auto& s : row) a.push_back(TrigSeries::from_json(s, dim));
    }
  }
  std::vector<TrigSeries> b;
  if (!doc.contains("b")) {
    b.assign(static_cast<size_t>(dim), TrigSeries(dim, 0.0));
  } else if (dim == 1 && !doc["b"].is_array()) {
    b.push_back(TrigSeries::from_json(doc["b"], 1));
  } else {
    const auto& bj = doc["b"];
    if (!bj.is_array() || static_cast<int>(bj.size()) != dim) throw ConfigError("'b' must have dim components");
    for (const auto& s : bj) b.push_back(TrigSeries::from_json(s, dim));
  }
  TrigSeries alpha = TrigSeries::from_json(doc["alpha"], dim);
  TrigSeries beta = doc.contains("beta") ? TrigSeries::from_json(doc["beta"], dim) : TrigSeries(dim, 0.0);
  return std::make_shared<const MediaSpec>(dim, std::move(a), std::move(b), std::move(alpha), std::move(beta));
}

MediaPtr parse_media_spec(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed media document: ") + e.what());
  }
  return media_from_json(doc);
}

MediaPtr load_media_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open media file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_media_spec(ss.str());
}

GridFunction sample_field(const TrigSeries& field, const TorusGrid& grid) {
  if (field.dim() != grid.dim()) throw DomainError("field and grid dimensions differ");
  GridFunction out(grid.size());
  for (Index node = 0; node < grid.size(); ++node) {
    const auto c = grid.coords(node);
    out[node] = field(std::span<const double>(c.data(), static_cast<size_t>(grid.dim())));
  }
  return out;
}

Mat symmetric_sqrt(const Mat& a) {
  if (a.rows() == 1) return Mat::Constant(1, 1, std::sqrt(a(0, 0)));
  // 2x2 closed form: sqrt(A) = (A + s I) / t with s = sqrt(det A), t = sqrt(tr A + 2 s).
  const double s = std::sqrt(a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0));
  const double t = std::sqrt(a(0, 0) + a(1, 1) + 2.0 * s);
  Mat r = a;
  r(0, 0) += s;
  r(1, 1) += s;
  return r / t;
}

}  // namespace perbranch
