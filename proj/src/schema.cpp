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

#include "pdstage/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "pdstage/core.hpp"

namespace pdstage {

std::vector<std::string> InstrumentSchema::required_columns() const {
  std::vector<std::string> cols = items;
  for (const auto& d : derived)
    if (d.kind == DerivationKind::kExternalScore) cols.push_back(d.inputs.front());
  if (row_filter) cols.push_back(row_filter->column);
  return cols;
}

std::vector<std::string> InstrumentSchema::feature_names() const {
  std::vector<std::string> out;
  out.reserve(derived.size());
  for (const auto& d : derived) out.push_back(d.name);
  return out;
}

bool InstrumentSchema::is_excluded(const std::string& item) const {
  return std::find(excluded.begin(), excluded.end(), item) != excluded.end();
}

std::pair<double, double> InstrumentSchema::range_of(const std::string& item) const {
  if (auto it = item_range.find(item); it != item_range.end()) return it->second;
  if (auto it = item_range.find("*"); it != item_range.end()) return it->second;
  return {0.0, 4.0};
}

std::size_t SchemaSet::item_count() const {
  std::size_t n = 0;
  for (const auto& s : instruments) n += s.items.size();
  return n;
}

std::vector<std::string> SchemaSet::feature_order() const {
  std::vector<std::string> out;
  for (const auto& s : instruments)
    for (const auto& d : s.derived) out.push_back(d.name);
  return out;
}

const InstrumentSchema* SchemaSet::find(const std::string& name) const {
  for (const auto& s : instruments)
    if (s.name == name) return &s;
  return nullptr;
}

const InstrumentSchema* SchemaSet::owner_of_feature(const std::string& feature) const {
  for (const auto& s : instruments)
    for (const auto& d : s.derived)
      if (d.name == feature) return &s;
  return nullptr;
}

std::optional<FeatureTag> SchemaSet::tag_of(const std::string& feature) const {
  const InstrumentSchema* s = owner_of_feature(feature);
  if (!s) return std::nullopt;
  if (auto it = s->tags.find(feature); it != s->tags.end()) return it->second;
  return std::nullopt;
}

void SchemaSet::validate() const {
  if (instruments.empty()) throw ConfigError("schema: no instruments declared");
  std::set<std::string> features;
  std::set<std::string> names;
  for (const auto& s : instruments) {
    const std::string where = "schema: instrument " + s.name + ": ";
    if (!names.insert(s.name).second) throw ConfigError("schema: duplicate instrument " + s.name);
    std::set<std::string> items(s.items.begin(), s.items.end());
    if (items.size() != s.items.size()) throw ConfigError(where + "duplicate item column");
    for (const auto& x : s.excluded)
      if (!items.count(x)) throw ConfigError(where + "excluded item " + x + " is not an item");
    if (s.derived.empty()) throw ConfigError(where + "no derived features");
    for (const auto& d : s.derived) {
      if (!features.insert(d.name).second)
        throw ConfigError(where + "duplicate feature name " + d.name);
      if (d.inputs.empty()) throw ConfigError(where + "feature " + d.name + " has no inputs");
      if (d.kind == DerivationKind::kExternalScore) {
        if (d.inputs.size() != 1) throw ConfigError(where + "score " + d.name + " needs one column");
        continue;
      }
      if (d.kind == DerivationKind::kPassthrough && d.inputs.size() != 1)
        throw ConfigError(where + "passthrough " + d.name + " needs exactly one item");
      for (const auto& in : d.inputs) {
        if (!items.count(in))
          throw ConfigError(where + "feature " + d.name + " references unknown item " + in);
        if (s.is_excluded(in))
          throw ConfigError(where + "feature " + d.name + " references excluded item " + in);
      }
    }
    for (const auto& [feat, tag] : s.tags)
      if (std::find_if(s.derived.begin(), s.derived.end(),
                       [&](const DerivedFeature& d) { return d.name == feat; }) == s.derived.end())
        throw ConfigError(where + "tag for unknown feature " + feat);
  }
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::string tok;
    if (line[i] == '"') {
      ++i;
      while (i < line.size() && line[i] != '"') tok.push_back(line[i++]);
      ++i;
    } else {
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#')
        tok.push_back(line[i++]);
    }
    out.push_back(tok);
  }
  return out;
}

// "STAIAD[1-20]" expands to STAIAD1 ... STAIAD20.
void expand_into(const std::string& tok, std::vector<std::string>& out) {
  static const std::regex range_re(R"(^(.*)\[(\d+)-(\d+)\](.*)$)");
  std::smatch m;
  if (std::regex_match(tok, m, range_re)) {
    int lo = std::stoi(m[2]);
    int hi = std::stoi(m[3]);
    for (int k = lo; k <= hi; ++k) out.push_back(m[1].str() + std::to_string(k) + m[4].str());
  } else {
    out.push_back(tok);
  }
}

std::vector<std::string> expand(std::vector<std::string>::const_iterator b,
                                std::vector<std::string>::const_iterator e) {
  std::vector<std::string> out;
  for (; b != e; ++b) expand_into(*b, out);
  return out;
}

std::vector<std::string> usable_items(const InstrumentSchema& s) {
  std::vector<std::string> out;
  for (const auto& i : s.items)
    if (!s.is_excluded(i)) out.push_back(i);
  return out;
}

}  // namespace

SchemaSet parse_schema(const std::string& text) {
  SchemaSet set;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  InstrumentSchema* cur = nullptr;
  // Wildcard rules are resolved at "end" once exclusions are known.
  std::vector<std::pair<std::size_t, bool>> pending_star;

  auto fail = [&](const std::string& msg) {
    throw ConfigError("schema line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokenize(line);
    if (tok.empty()) continue;
    const std::string& kw = tok[0];
    if (!cur) {
      if (kw == "schema_version" && tok.size() == 2) {
        set.version = std::stoi(tok[1]);
      } else if (kw == "subject_column" && tok.size() == 2) {
        set.subject_column = tok[1];
      } else if (kw == "visit_column" && tok.size() == 2) {
        set.visit_column = tok[1];
      } else if (kw == "instrument" && tok.size() == 2) {
        set.instruments.emplace_back();
        cur = &set.instruments.back();
        cur->name = tok[1];
        cur->file = tok[1] + ".csv";
        pending_star.clear();
      } else {
        fail("unexpected '" + kw + "' outside an instrument block");
      }
      continue;
    }
    if (kw == "end") {
      for (auto [idx, is_sum] : pending_star) {
        auto& d = cur->derived[idx];
        if (is_sum) d.inputs = usable_items(*cur);
      }
      // Expand "passthrough *" placeholders in declaration order.
      std::vector<DerivedFeature> resolved;
      for (auto& d : cur->derived) {
        if (d.kind == DerivationKind::kPassthrough && d.name == "*") {
          for (const auto& i : usable_items(*cur))
            resolved.push_back({i, DerivationKind::kPassthrough, {i}});
        } else {
          resolved.push_back(std::move(d));
        }
      }
      cur->derived = std::move(resolved);
      cur = nullptr;
    } else if (kw == "assessment" && tok.size() == 2) {
      cur->assessment = tok[1];
    } else if (kw == "file" && tok.size() == 2) {
      cur->file = tok[1];
    } else if (kw == "items") {
      auto v = expand(tok.begin() + 1, tok.end());
      cur->items.insert(cur->items.end(), v.begin(), v.end());
    } else if (kw == "exclude") {
      auto v = expand(tok.begin() + 1, tok.end());
      cur->excluded.insert(cur->excluded.end(), v.begin(), v.end());
    } else if (kw == "range" && tok.size() >= 3) {
      std::pair<double, double> r{std::stod(tok[1]), std::stod(tok[2])};
      if (r.first > r.second) fail("range lower bound above upper bound");
      if (tok.size() == 3) {
        cur->item_range["*"] = r;
      } else {
        for (const auto& i : expand(tok.begin() + 3, tok.end())) cur->item_range[i] = r;
      }
    } else if (kw == "passthrough" && tok.size() >= 2) {
      if (tok.size() == 2 && tok[1] == "*") {
        cur->derived.push_back({"*", DerivationKind::kPassthrough, {"*"}});
      } else {
        for (const auto& i : expand(tok.begin() + 1, tok.end()))
          cur->derived.push_back({i, DerivationKind::kPassthrough, {i}});
      }
    } else if ((kw == "sum" || kw == "score") && tok.size() >= 4 && tok[2] == "=") {
      DerivedFeature d;
      d.name = tok[1];
      d.kind = kw == "sum" ? DerivationKind::kSum : DerivationKind::kExternalScore;
      if (kw == "sum" && tok.size() == 4 && tok[3] == "*") {
        pending_star.emplace_back(cur->derived.size(), true);
      } else {
        d.inputs = expand(tok.begin() + 3, tok.end());
      }
      cur->derived.push_back(std::move(d));
    } else if (kw == "row_filter" && tok.size() == 3) {
      cur->row_filter = RowFilter{tok[1], tok[2]};
    } else if (kw == "tag" && tok.size() == 4) {
      cur->tags[tok[1]] = FeatureTag{tok[2], tok[3]};
    } else {
      fail("unrecognized directive '" + kw + "'");
    }
  }
  if (cur) throw ConfigError("schema: instrument " + cur->name + " is missing 'end'");
  set.validate();
  return set;
}

SchemaSet load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

std::filesystem::path default_schema_path() {
  return std::filesystem::path(PDSTAGE_SOURCE_DIR) / "data" / "schema" / "instruments.schema";
}

const std::vector<InstrumentCount>& reference_instrument_counts() {
  static const std::vector<InstrumentCount> counts = {
      {"EPW", 8, 9},        {"GDS", 15, 16},      {"UPDRS_I", 7, 7},    {"UPDRS_II", 13, 13},
      {"QUIP", 13, 13},     {"REM", 21, 20},      {"SCOPA_AUT", 21, 21}, {"STAI", 40, 42},
      {"BENTON", 15, 1},    {"HOPKINS", 7, 4},    {"LNS", 7, 1},        {"UPDRS_III", 32, 32},
      {"MOCA", 27, 27},     {"SEMANTIC_FLUENCY", 3, 1}, {"SYMBOL_DIGIT", 1, 1},
  };
  return counts;
}

}  // namespace pdstage
