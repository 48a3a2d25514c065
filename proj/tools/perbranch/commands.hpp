// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "perbranch/output.hpp"

namespace perbranch::cli {

/// Options shared by every subcommand.
struct Common {
  std::string media_path;
  std::string out_dir = ".";
  int grid = 0;  // nodes per unit length; 0 keeps the module default
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> argv;
};

struct EigArgs {
  std::vector<std::string> tilts;
  std::string range;
  bool dump = false;
};

struct RateArgs {
  std::vector<std::string> velocities;
  std::string range;
};

struct KernelArgs {
  std::vector<std::string> times{"5", "10", "20"};
  std::vector<std::string> ys{"0", "1", "2", "3"};
  std::string x;
  double dt = 1e-3;
};

struct HomogArgs {
  std::vector<std::string> tilts{"0"};
  std::string range;
};

struct MomentsArgs {
  int max_order = 3;
  double horizon = 8.0;
  int samples = 8;
  double dt = 1e-3;
  std::string corner;  // cube target when set, total population otherwise
  std::string coupling = "trapezoidal";
};

struct GammaArgs {
  int max_order = 3;
  double lo = -3.0;
  double hi = 3.0;
  int points = 121;
};

struct SimArgs {
  std::optional<long> replicas;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::vector<std::string> targets;
  std::string x0;
  std::optional<long> cap;
  bool cap_override = false;
};

/// Each returns the process exit code.
int cmd_eig(const Common& common, const EigArgs& args);
int cmd_rate(const Common& common, const RateArgs& args);
int cmd_kernel(const Common& common, const KernelArgs& args);
int cmd_homog(const Common& common, const HomogArgs& args);
int cmd_moments(const Common& common, const MomentsArgs& args);
int cmd_gamma(const Common& common, const GammaArgs& args);
int cmd_sim(const Common& common, const SimArgs& args);

/// Media from a plain media document, or from the "media" member of a
/// config or sidecar document.
MediaPtr load_media(const std::string& path, nlohmann::json* document = nullptr);
RunContext make_context(const Common& common, const char* command, MediaPtr media);

}  // namespace perbranch::cli
