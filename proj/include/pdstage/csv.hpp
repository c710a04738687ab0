// Copyright 2026 The pdstage Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pdstage::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, or nullopt.
  std::optional<std::size_t> column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in);

void write(const std::filesystem::path& path, const Table& table);
void write_row(std::ostream& out, const std::vector<std::string>& fields, char sep = ',');

/// Shortest round-trip decimal form; NaN renders as an empty cell.
std::string format_number(double v);

/// Parses a real; blank, "NA", "NaN" and anything unparseable give nullopt.
std::optional<double> parse_number(const std::string& s);

}  // namespace pdstage::csv
