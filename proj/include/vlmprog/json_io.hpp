// Copyright 2026 The vlmprog Authors
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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vlmprog {

using Json = nlohmann::json;

/// Serializes with sorted keys, two-space indentation, integers verbatim and
/// floating-point values with 12 significant digits, followed by a newline.
/// Throws ValidationError("non-finite value ...") on NaN or infinity.
/// Pass kExactDigits where values must round-trip bit for bit.
std::string canonical_dump(const Json& j, int significant_digits = 12);

/// Enough digits for any double to parse back to itself.
inline constexpr int kExactDigits = 17;

/// Renders a double the way canonical_dump does.
std::string format_number(double v, int significant_digits = 12);

Json parse_json(std::string_view text, std::string_view what = "document");
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename, so readers never observe a
/// partially written file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace vlmprog
