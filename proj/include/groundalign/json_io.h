/* Copyright 2026 The groundalign Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef GROUNDALIGN_JSON_IO_H_
#define GROUNDALIGN_JSON_IO_H_

#include <filesystem>
#include <string>

#include "json.hpp"

namespace groundalign {

// Reads and parses a JSON document. Syntax errors become ParseError with
// line:column context; a missing file becomes IoError.
nlohmann::json ReadJsonFile(const std::filesystem::path& path);

// Writes `value` pretty-printed with a trailing newline, creating parent
// directories as needed.
void WriteJsonFile(const std::filesystem::path& path,
                   const nlohmann::json& value);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace groundalign

#endif  // GROUNDALIGN_JSON_IO_H_
