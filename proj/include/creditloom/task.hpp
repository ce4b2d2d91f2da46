// Copyright 2026 The Credit Loom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <optional>
#include <string>

#include "creditloom/labels.hpp"

namespace creditloom {

// One four-option multiple-choice item.
struct TaskInstance {
  std::string id;
  std::string question;
  std::array<std::string, 4> options;  // indexed by A..D
  OptionLabel gold = OptionLabel::kA;
  std::optional<std::string> category;

  const std::string& option(OptionLabel label) const { return options.at(static_cast<std::size_t>(label)); }

  bool operator==(const TaskInstance&) const = default;
};

// "A. ...\nB. ...\nC. ...\nD. ..."
inline std::string render_options(const TaskInstance& x) {
  std::string out;
  for (auto label : kValidOptions) {
    if (!out.empty()) out += '\n';
    out += option_char(label);
    out += ". ";
    out += x.option(label);
  }
  return out;
}

}  // namespace creditloom
