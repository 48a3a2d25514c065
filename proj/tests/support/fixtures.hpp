// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "perbranch/periodic_media.hpp"

namespace perbranch::testing {

/// a, b, alpha, beta constant in d = 1.
MediaPtr constant_media(double a, double b, double alpha, double beta = 0.0);
/// a = a0 I, b = 0 in d = 2.
MediaPtr constant_media_2d(double a0, double alpha, double beta = 0.0);
/// a = 1, b = 0, alpha = 0.5 + 0.3 cos(2 pi x), beta = 0.
MediaPtr cosine_media();
/// a = 1, b = 0.5 sin(2 pi x), alpha = beta = 0.
MediaPtr sine_drift_media();
/// d = 2, a with a cross term, b and alpha periodic.
MediaPtr rough_media_2d();

std::string media_document(double a, double b, double alpha, double beta);

}  // namespace perbranch::testing
