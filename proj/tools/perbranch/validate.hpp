// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <json.hpp>

#include "perbranch/commands.hpp"

namespace perbranch::cli {

/// Names accepted by `validate --suite`.
const std::vector<std::string>& validation_suites();

/// Runs one suite and returns its report: {"suite", "media_hash", "checks": [...], "pass"}.
/// The report holds no timings, so equal inputs give byte-identical dumps.
nlohmann::json run_suite(const std::string& suite, const MediaPtr& media, const Common& common);

/// Writes validate_<suite>.json (and echoes it to stdout); exit code 1 on any failed check.
int cmd_validate(const Common& common, const std::string& suite);

}  // namespace perbranch::cli
