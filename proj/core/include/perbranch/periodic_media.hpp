// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "perbranch/common.hpp"
#include "perbranch/torus_grid.hpp"

namespace perbranch {

/// One harmonic of a trigonometric series: cos_amp*cos(2pi k.x) + sin_amp*sin(2pi k.x).
struct TrigTerm {
  std::array<int, 2> wave{0, 0};
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

/// Truncated trigonometric series on the unit torus. Evaluation reduces each
/// coordinate to [0,1) first, so f(x) and f(x + e_j) agree to rounding.
class TrigSeries {
 public:
  TrigSeries() = default;
  TrigSeries(int dim, double constant, std::vector<TrigTerm> terms = {});

  static TrigSeries constant(int dim, double value) { return TrigSeries(dim, value); }

  int dim() const { return dim_; }
  double constant_term() const { return constant_; }
  const std::vector<TrigTerm>& terms() const { return terms_; }
  bool is_constant() const;

  /// Largest |k_j| over all terms and axes.
  int max_wave_number() const;

  double operator()(std::span<const double> x) const;
  double operator()(const Vec& x) const { return (*this)(std::span<const double>(x.data(), x.size())); }
  double at(double x) const;
  double at(double x, double y) const;

  nlohmann::json to_json() const;
  static TrigSeries from_json(const nlohmann::json& node, int dim);

  friend bool operator==(const TrigSeries& lhs, const TrigSeries& rhs);

 private:
  int dim_ = 1;
  double constant_ = 0.0;
  std::vector<TrigTerm> terms_;
};

/// Periodic coefficients of one branching-diffusion problem: diffusion matrix
/// a = sigma sigma^T, drift b, branching rate alpha and killing rate beta.
class MediaSpec {
 public:
  /// Validates symmetry and positive definiteness of a and nonnegativity of
  /// alpha, beta on a probe grid with `probe_nodes` points per axis.
  MediaSpec(int dim, std::vector<TrigSeries> diffusion, std::vector<TrigSeries> drift,
            TrigSeries branching, TrigSeries killing, int probe_nodes = 64);

  int dim() const { return dim_; }
  const TrigSeries& diffusion(int i, int j) const { return a_[static_cast<size_t>(i * dim_ + j)]; }
  const TrigSeries& drift(int i) const { return b_[static_cast<size_t>(i)]; }
  const TrigSeries& branching() const { return alpha_; }
  const TrigSeries& killing() const { return beta_; }

  Mat diffusion_at(std::span<const double> x) const;
  Vec drift_at(std::span<const double> x) const;
  double potential_at(std::span<const double> x) const;

  /// Largest wave number over all coefficient series.
  int max_wave_number() const;
  bool is_constant() const;

  /// Canonical JSON form; every series is written as an object.
  const nlohmann::json& canonical() const { return canonical_; }
  /// 16 hex digits, FNV-1a over the canonical dump.
  const std::string& hash() const { return hash_; }

 private:
  int dim_;
  std::vector<TrigSeries> a_;
  std::vector<TrigSeries> b_;
  TrigSeries alpha_;
  TrigSeries beta_;
  nlohmann::json canonical_;
  std::string hash_;
};

using MediaPtr = std::shared_ptr<const MediaSpec>;

MediaPtr media_from_json(const nlohmann::json& document);
MediaPtr parse_media_spec(std::string_view document);
MediaPtr load_media_spec(const std::filesystem::path& path);

/// Values of `field` at every node of `grid` (x_i = origin + i/n).
GridFunction sample_field(const TrigSeries& field, const TorusGrid& grid);

/// Symmetric positive square root of a symmetric positive definite 1x1 or 2x2 matrix.
Mat symmetric_sqrt(const Mat& a);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace perbranch
