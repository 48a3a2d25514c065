// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "support/fixtures.hpp"

#include <json.hpp>

namespace perbranch::testing {

std::string media_document(double a, double b, double alpha, double beta) {
  nlohmann::json j{{"dimension", 1}, {"a", a}, {"b", b}, {"alpha", alpha}, {"beta", beta}};
  return j.dump();
}

MediaPtr constant_media(double a, double b, double alpha, double beta) {
  return parse_media_spec(media_document(a, b, alpha, beta));
}

MediaPtr constant_media_2d(double a0, double alpha, double beta) {
  nlohmann::json j{{"dimension", 2},
                   {"a", {{a0, 0.0}, {0.0, a0}}},
                   {"b", {0.0, 0.0}},
                   {"alpha", alpha},
                   {"beta", beta}};
  return parse_media_spec(j.dump());
}

MediaPtr cosine_media() {
  return parse_media_spec(R"({"dimension": 1, "a": 1, "b": 0,
    "alpha": {"const": 0.5, "terms": [{"k": 1, "cos": 0.3}]}, "beta": 0})");
}

MediaPtr sine_drift_media() {
  return parse_media_spec(R"({"dimension": 1, "a": 1,
    "b": {"const": 0, "terms": [{"k": 1, "sin": 0.5}]}, "alpha": 0, "beta": 0})");
}

MediaPtr rough_media_2d() {
  return parse_media_spec(R"({"dimension": 2,
    "a": [[{"const": 1.0, "terms": [{"k": [1, 0], "cos": 0.2}]}, 0.2],
          [0.2, {"const": 0.8, "terms": [{"k": [0, 1], "sin": 0.1}]}]],
    "b": [{"const": 0.1, "terms": [{"k": [0, 1], "cos": 0.2}]}, 0.0],
    "alpha": {"const": 0.6, "terms": [{"k": [1, 1], "cos": 0.2}]},
    "beta": 0.1})");
}

}  // namespace perbranch::testing
