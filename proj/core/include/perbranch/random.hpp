// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

namespace perbranch {

/// Philox4x32-10 counter-based generator. The key is derived from
/// (seed, stream), so every replica owns an independent, order-free stream.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  /// Uniform in (0, 1), never exactly 0 or 1.
  double uniform();
  /// Standard normal by Box-Muller; the second variate is cached.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace perbranch
