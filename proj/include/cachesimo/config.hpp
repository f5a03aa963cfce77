/*
 * Copyright 2026 The cachesimo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file config.hpp
 * @brief Flat key = value experiment files.
 *
 * Accepted syntax is a TOML subset: one `key = value` per line, `#` comments,
 * numbers, booleans, quoted or bare strings and single-line arrays. A file
 * whose first non-blank character is `{` is read as a flat JSON object
 * instead; an object stored under "config" (as in a sidecar) is unwrapped.
 */
#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cachesimo::config {

/// Parse or type error. line() is 0 for values that did not come from a file line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string key = {}, int line = 0);
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  std::string key_;
  int line_;
};

struct Entry {
  nlohmann::json value;
  int line = 0;
};

class ConfigMap {
 public:
  void set(const std::string& key, nlohmann::json value, int line = 0);
  /// Parses text with the file value syntax and stores it (used for command-line overrides).
  void set_text(const std::string& key, std::string_view text);
  void erase(const std::string& key) { entries_.erase(key); }
  void merge(const ConfigMap& overrides);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  /// Accepts a scalar as a one-element list.
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  /// Throws on the first key not in allowed.
  void require_known(const std::vector<std::string>& allowed) const;

  nlohmann::json to_json() const;

 private:
  const Entry& at(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::map<std::string, Entry> entries_;
};

/// Parses one value: number, true/false, "quoted", bare word or [a, b, ...].
nlohmann::json parse_value(std::string_view text);

ConfigMap parse(std::string_view text);
ConfigMap load(const std::filesystem::path& path);

/// 10^{db/10}
double db_to_linear(double db);
double linear_to_db(double linear);

}  // namespace cachesimo::config
