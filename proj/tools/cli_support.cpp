#include "cli_support.hpp"

#include <algorithm>
#include <iostream>

#include "ispw/errors.hpp"

namespace ispw::cli {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CLI::ParseError*>(&e) != nullptr) return 1;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    const std::string& k = err->kind();
    if (k == "parameter" || k == "format" || k == "dimension" || k == "io" || k == "state") return 1;
  }
  return 2;
}

std::string error_line(const std::exception& e) {
  std::string kind = "runtime";
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    kind = err->kind();
  } else if (dynamic_cast<const CLI::ParseError*>(&e) != nullptr) {
    kind = "usage";
  }
  return nlohmann::json{{"error", kind}, {"message", e.what()}}.dump(-1, ' ', false,
                                                                     nlohmann::json::error_handler_t::replace);
}

CLI::App* deepest_subcommand(CLI::App& app) {
  CLI::App* cur = &app;
  for (;;) {
    const auto subs = cur->get_subcommands();
    if (subs.empty()) return cur;
    cur = subs.front();
  }
}

namespace {

std::vector<std::string> as_results(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return {v.get<std::string>()};
  if (v.is_boolean()) return {v.get<bool>() ? "true" : "false"};
  if (v.is_number_integer() || v.is_number_unsigned() || v.is_number_float()) return {v.dump()};
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (e.is_array() || e.is_object()) throw ParameterError("config key '" + key + "': nested values not allowed");
      auto r = as_results(key, e);
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }
  throw ParameterError("config key '" + key + "' has an unsupported value type");
}

}  // namespace

void merge_config(CLI::App& app, const nlohmann::json& config, const std::vector<std::string>& reserved) {
  if (!config.is_object()) throw ParameterError("--config must hold a JSON object");
  for (const auto& [key, value] : config.items()) {
    if (std::find(reserved.begin(), reserved.end(), key) != reserved.end()) continue;
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = nullptr;
    for (CLI::App* cur = deepest_subcommand(app); cur != nullptr && opt == nullptr; cur = cur->get_parent()) {
      opt = cur->get_option_no_throw("--" + flag);
    }
    if (opt == nullptr || flag == "config" || flag == "help") {
      throw ParameterError("unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    for (const auto& r : as_results(key, value)) opt->add_result(r);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ParameterError("config key '" + key + "': " + e.what());
    }
  }
}

void print_result(const nlohmann::json& j) { std::cout << j.dump() << "\n" << std::flush; }

const std::string& require_flag(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ParameterError("missing required flag " + flag);
  return value;
}

}  // namespace ispw::cli
