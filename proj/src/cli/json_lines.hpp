/* Copyright 2026 The QSync Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace qsync::cli {

/// Maps JSON pointers ("/subsystems/0/omega") to 1-based source lines.
/// Object members map to the line of their key.
class JsonLocator {
 public:
  explicit JsonLocator(std::string_view text);

  /// Line of the pointer, or of its nearest located ancestor; 1 when nothing matches.
  int line_of(std::string pointer) const;

 private:
  int line_at(std::size_t offset) const;

  std::string_view text_;
  std::map<std::string, std::size_t> offsets_;
};

/// "/a/b" + "c" -> "/a/b/c", escaping '~' and '/' in the token.
std::string pointer_append(const std::string& parent, const std::string& token);

}  // namespace qsync::cli
