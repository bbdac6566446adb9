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

#ifndef SYNVITA_JSONL_HPP_
#define SYNVITA_JSONL_HPP_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace synvita::jsonl {

using Json = nlohmann::ordered_json;

// Calls `fn(record, line_number)` for every non-blank line. Line numbers are
// 1-based. Parse failures raise DataError with the path and line number.
void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, std::size_t)>& fn);

// Opens `path` for writing, truncating. Throws DataError when not writable.
std::ofstream open_for_write(const std::filesystem::path& path);

// Writes one compact record plus newline.
void write(std::ostream& out, const Json& record);

// Typed field access; errors name the field and line.
std::string string_field(const Json& record, std::string_view name, std::size_t line);
double number_field(const Json& record, std::string_view name, std::size_t line);

}  // namespace synvita::jsonl

#endif  // SYNVITA_JSONL_HPP_
