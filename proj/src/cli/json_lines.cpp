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

#include "json_lines.hpp"

#include <algorithm>
#include <vector>

#include <rapidjson/reader.h>

namespace qsync::cli {

namespace {

// SAX handler recording a stream offset inside each value (or member key). Scalars
// and keys are parsed from a local copy of the stream, so their offset is the token start.
class OffsetRecorder : public rapidjson::BaseReaderHandler<rapidjson::UTF8<>, OffsetRecorder> {
 public:
  OffsetRecorder(const rapidjson::StringStream& stream, std::map<std::string, std::size_t>& out)
      : stream_(stream), out_(out) {}

  bool Default() { return value(); }
  bool StartObject() {
    std::string pointer = current();
    value();
    frames_.push_back({std::move(pointer), true, 0, {}});
    return true;
  }
  bool Key(const char* str, rapidjson::SizeType len, bool) {
    frames_.back().key.assign(str, len);
    out_.emplace(current(), stream_.Tell());
    return true;
  }
  bool EndObject(rapidjson::SizeType) {
    frames_.pop_back();
    return true;
  }
  bool StartArray() {
    std::string pointer = current();
    value();
    frames_.push_back({std::move(pointer), false, 0, {}});
    return true;
  }
  bool EndArray(rapidjson::SizeType) {
    frames_.pop_back();
    return true;
  }

 private:
  struct Frame {
    std::string pointer;
    bool object;
    std::size_t next_index;
    std::string key;
  };

  std::string current() const {
    if (frames_.empty()) return "";
    const auto& f = frames_.back();
    return pointer_append(f.pointer, f.object ? f.key : std::to_string(f.next_index));
  }

  bool value() {
    if (!frames_.empty() && !frames_.back().object) {
      out_.emplace(current(), stream_.Tell());
      ++frames_.back().next_index;
    } else if (frames_.empty()) {
      out_.emplace("", stream_.Tell());
    }
    return true;
  }

  const rapidjson::StringStream& stream_;
  std::map<std::string, std::size_t>& out_;
  std::vector<Frame> frames_;
};

}  // namespace

std::string pointer_append(const std::string& parent, const std::string& token) {
  std::string out = parent + "/";
  for (char c : token) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

JsonLocator::JsonLocator(std::string_view text) : text_(text) {
  // The reader needs a terminated buffer.
  const std::string copy(text);
  rapidjson::StringStream stream(copy.c_str());
  OffsetRecorder handler(stream, offsets_);
  rapidjson::Reader reader;
  reader.Parse<rapidjson::kParseCommentsFlag | rapidjson::kParseStopWhenDoneFlag>(stream, handler);
}

int JsonLocator::line_of(std::string pointer) const {
  for (;;) {
    if (const auto it = offsets_.find(pointer); it != offsets_.end()) return line_at(it->second);
    if (pointer.empty()) return 1;
    pointer.erase(pointer.rfind('/'));
  }
}

int JsonLocator::line_at(std::size_t offset) const {
  offset = std::min(offset, text_.size());
  return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace qsync::cli
