#pragma once

// Shared plumbing for the ispw command-line tool: config merging, result
// lines and the error-to-exit-code contract.

#include <CLI11.hpp>
#include <json.hpp>
#include <string>
#include <vector>

namespace ispw::cli {

/// Exit codes: 0 success, 1 validation error (bad flags, config, files,
/// formats), 2 runtime error.
int exit_code_for(const std::exception& e);

/// {"error":"<kind>","message":"..."} on one line.
std::string error_line(const std::exception& e);

/// Applies a `--config` JSON object to `app` and its selected subcommands.
/// A key names a long option of the deepest selected subcommand or one of its
/// parents (dashes or underscores). Options already given on the command line
/// win. Keys in `reserved` are skipped; any other unknown key is a ParameterError.
void merge_config(CLI::App& app, const nlohmann::json& config, const std::vector<std::string>& reserved);

/// Innermost selected subcommand.
CLI::App* deepest_subcommand(CLI::App& app);

/// Prints one JSON result line on stdout.
void print_result(const nlohmann::json& j);

/// Throws ParameterError naming the flag when `value` is empty.
const std::string& require_flag(const std::string& value, const std::string& flag);

}  // namespace ispw::cli
