// Copyright 2026 The trajq Authors. All rights reserved.
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

// CoNLL-U reader and validator.
//
// Token lines carry 10 tab-separated columns; only ID (1), FORM (2) and
// HEAD (7) are consumed. Comment lines start with '#'. Multiword ranges
// ("3-4") and empty nodes ("3.1") are skipped. Sentences are separated by
// blank lines.

#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trajq/dep_tree.hpp"

namespace trajq {

class ConlluError : public std::runtime_error {
 public:
  ConlluError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ConlluSentence {
  DepTree tree;
  std::size_t first_line = 0;
};

namespace conllu_detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

inline bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace conllu_detail

inline std::vector<ConlluSentence> read_conllu(std::istream& in) {
  using namespace conllu_detail;
  std::vector<ConlluSentence> out;
  std::vector<std::string> forms;
  std::vector<std::size_t> heads;
  std::vector<std::size_t> lines;
  std::size_t first = 0, lineno = 0;

  auto finish = [&]() {
    if (forms.empty()) return;
    for (std::size_t i = 0; i < heads.size(); ++i) {
      if (heads[i] > forms.size()) {
        throw ConlluError(lines[i], "head " + std::to_string(heads[i]) +
                                         " exceeds sentence length " +
                                         std::to_string(forms.size()));
      }
    }
    ConlluSentence s;
    s.tree = DepTree::from_conll_heads(std::move(forms), heads);
    s.first_line = first;
    try {
      s.tree.validate();
    } catch (const TreeError& e) {
      throw ConlluError(first, std::string("invalid tree: ") + e.what());
    }
    out.push_back(std::move(s));
    forms.clear();
    heads.clear();
    lines.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish();
      continue;
    }
    if (line[0] == '#') continue;
    auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw ConlluError(lineno, "expected 10 tab-separated columns, got " +
                                    std::to_string(cols.size()));
    }
    if (cols[0].find_first_of("-.") != std::string_view::npos) continue;
    std::size_t index = 0, head = 0;
    if (!parse_index(cols[0], index)) {
      throw ConlluError(lineno, "token index '" + std::string(cols[0]) + "' is not an integer");
    }
    if (forms.empty()) first = lineno;
    if (index != forms.size() + 1) {
      throw ConlluError(lineno, "token index " + std::to_string(index) + " out of sequence");
    }
    if (!parse_index(cols[6], head)) {
      throw ConlluError(lineno, "head '" + std::string(cols[6]) + "' is not an integer");
    }
    if (cols[1].empty()) throw ConlluError(lineno, "empty FORM column");
    forms.emplace_back(cols[1]);
    heads.push_back(head);
    lines.push_back(lineno);
  }
  finish();
  return out;
}

inline std::vector<ConlluSentence> read_conllu_string(const std::string& text) {
  std::istringstream in(text);
  return read_conllu(in);
}

inline std::vector<ConlluSentence> read_conllu_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CoNLL-U file " + path);
  return read_conllu(in);
}

}  // namespace trajq
