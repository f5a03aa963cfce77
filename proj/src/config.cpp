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

#include "cachesimo/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cachesimo::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string located(const std::string& what, const std::string& key, int line) {
  std::string out;
  if (line > 0) out += "line " + std::to_string(line) + ": ";
  if (!key.empty()) out += "key '" + key + "': ";
  return out + what;
}

bool bare_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '+';
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

// Index of the first '#' outside double quotes, or npos.
std::size_t comment_start(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted && c == '\\') {
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (c == '#' && !quoted) {
      return i;
    }
  }
  return std::string_view::npos;
}

std::vector<std::string_view> split_items(std::string_view body) {
  std::vector<std::string_view> items;
  bool quoted = false;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (quoted && c == '\\') {
      ++i;
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      items.push_back(trim(body.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (quoted) throw ConfigError("unterminated string");
  auto last = trim(body.substr(start));
  if (!last.empty()) items.push_back(last);
  else if (!items.empty()) throw ConfigError("empty array element");
  return items;
}

nlohmann::json parse_string(std::string_view s) {
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      if (i + 2 >= s.size()) throw ConfigError("dangling escape in string");
      c = s[++i];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': case '\\': out += c; break;
        default: throw ConfigError(std::string("unknown escape \\") + c);
      }
    } else if (c == '"') {
      throw ConfigError("unexpected quote inside string");
    } else {
      out += c;
    }
  }
  return out;
}

nlohmann::json scalar_from_json(const nlohmann::json& v, const std::string& key) {
  if (v.is_number() || v.is_string() || v.is_boolean()) return v;
  if (v.is_array()) {
    for (const auto& item : v)
      if (!(item.is_number() || item.is_string() || item.is_boolean()))
        throw ConfigError("arrays may hold only scalars", key);
    return v;
  }
  throw ConfigError("unsupported JSON value", key);
}

ConfigMap parse_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("JSON config must be an object");
  if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  ConfigMap out;
  for (const auto& [key, value] : doc.items()) {
    if (!valid_key(key)) throw ConfigError("invalid key", key);
    out.set(key, scalar_from_json(value, key));
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, std::string key, int line)
    : std::runtime_error(located(what, key, line)), key_(std::move(key)), line_(line) {}

nlohmann::json parse_value(std::string_view text) {
  const auto s = trim(text);
  if (s.empty()) throw ConfigError("missing value");
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated array");
    auto array = nlohmann::json::array();
    for (auto item : split_items(s.substr(1, s.size() - 2))) array.push_back(parse_value(item));
    return array;
  }
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError("unterminated string");
    return parse_string(s);
  }
  if (s == "true") return true;
  if (s == "false") return false;

  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  long long i = 0;
  if (auto [p, ec] = std::from_chars(begin, end, i); ec == std::errc() && p == end) return i;
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(begin, end, d); ec == std::errc() && p == end) {
    if (!std::isfinite(d)) throw ConfigError("non-finite number '" + std::string(s) + "'");
    return d;
  }
  const bool numeric_start = std::isdigit(static_cast<unsigned char>(s.front())) || s.front() == '-' ||
                             s.front() == '+' || s.front() == '.';
  if (!numeric_start) {
    bool bare = true;
    for (char c : s) bare = bare && bare_char(c);
    if (bare) return std::string(s);
  }
  throw ConfigError("cannot parse value '" + std::string(s) + "'");
}

ConfigMap parse(std::string_view text) {
  const auto body = trim(text);
  if (!body.empty() && body.front() == '{') return parse_json(body);

  ConfigMap out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view view(raw);
    view = trim(view.substr(0, comment_start(view)));
    if (view.empty()) continue;
    if (view.front() == '[') throw ConfigError("tables are not supported; use flat keys", {}, line);
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", {}, line);
    const std::string key(trim(view.substr(0, eq)));
    if (!valid_key(key)) throw ConfigError("invalid key", key, line);
    if (out.has(key)) throw ConfigError("duplicate key", key, line);
    try {
      out.set(key, parse_value(view.substr(eq + 1)), line);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), key, line);
    }
  }
  return out;
}

ConfigMap load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

void ConfigMap::set(const std::string& key, nlohmann::json value, int line) {
  entries_[key] = Entry{std::move(value), line};
}

void ConfigMap::set_text(const std::string& key, std::string_view text) {
  if (!valid_key(key)) throw ConfigError("invalid key", key);
  try {
    set(key, parse_value(text));
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), key);
  }
}

void ConfigMap::merge(const ConfigMap& overrides) {
  for (const auto& [key, entry] : overrides.entries_) entries_[key] = entry;
}

const Entry& ConfigMap::at(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("required key missing", key);
  return it->second;
}

void ConfigMap::fail(const std::string& key, const std::string& what) const {
  const auto it = entries_.find(key);
  throw ConfigError(what, key, it == entries_.end() ? 0 : it->second.line);
}

double ConfigMap::number(const std::string& key) const {
  const auto& v = at(key).value;
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

double ConfigMap::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long ConfigMap::integer(const std::string& key) const {
  const auto& v = at(key).value;
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  fail(key, "expected an integer");
}

long long ConfigMap::integer(const std::string& key, long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::string ConfigMap::string(const std::string& key) const {
  const auto& v = at(key).value;
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::string ConfigMap::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

bool ConfigMap::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key).value;
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::vector<double> ConfigMap::numbers(const std::string& key) const {
  const auto& v = at(key).value;
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) fail(key, "expected a number or an array of numbers");
  std::vector<double> out;
  for (const auto& item : v) {
    if (!item.is_number()) fail(key, "array holds a non-number");
    out.push_back(item.get<double>());
  }
  return out;
}

std::vector<std::string> ConfigMap::strings(const std::string& key) const {
  const auto& v = at(key).value;
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) fail(key, "expected a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) fail(key, "array holds a non-string");
    out.push_back(item.get<std::string>());
  }
  return out;
}

void ConfigMap::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, entry] : entries_) {
    bool known = false;
    for (const auto& a : allowed) known = known || a == key;
    if (!known) throw ConfigError("unknown key", key, entry.line);
  }
}

nlohmann::json ConfigMap::to_json() const {
  auto out = nlohmann::json::object();
  for (const auto& [key, entry] : entries_) out[key] = entry.value;
  return out;
}

}  // namespace cachesimo::config
