// Copyright 2026 The Synvita Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "synvita/jsonl.hpp"

#include "synvita/errors.hpp"

namespace synvita::jsonl {

namespace {

std::string where(std::size_t line) { return "line " + std::to_string(line); }

}  // namespace

void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": malformed record at " + where(line) + ": " + e.what());
    }
    if (!record.is_object()) {
      throw DataError(path.string() + ": malformed record at " + where(line) +
                      ": expected a JSON object");
    }
    fn(record, line);
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write(std::ostream& out, const Json& record) { out << record.dump() << '\n'; }

std::string string_field(const Json& record, std::string_view name, std::size_t line) {
  auto it = record.find(std::string(name));
  if (it == record.end() || !it->is_string()) {
    throw DataError("missing or non-string field \"" + std::string(name) + "\" at " + where(line));
  }
  return it->get<std::string>();
}

double number_field(const Json& record, std::string_view name, std::size_t line) {
  auto it = record.find(std::string(name));
  if (it == record.end() || !it->is_number()) {
    throw DataError("missing or non-numeric field \"" + std::string(name) + "\" at " + where(line));
  }
  return it->get<double>();
}

}  // namespace synvita::jsonl
