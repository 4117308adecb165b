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

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trajq {

using TokenId = std::uint32_t;

// Lowercases, splits on whitespace and makes every punctuation character a
// token of its own.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

// Token <-> id map. Reserved tokens are upper case so the tokenizer can never
// produce them from game text.
class Vocab {
 public:
  static constexpr const char* kStart = "S";
  static constexpr const char* kPad = "O";
  static constexpr const char* kUnknown = "UNK";

  Vocab() {
    add(kStart);
    add(kPad);
    add(kUnknown);
  }

  // Reads one token per line; the line number is the id.
  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file " + path);
    Vocab v(Empty{});
    std::string line;
    while (std::getline(in, line)) {
      if (v.index_.count(line)) {
        throw std::runtime_error("duplicate vocab token '" + line + "' in " + path);
      }
      v.add(line);
    }
    for (const char* r : {kStart, kPad, kUnknown}) {
      if (!v.index_.count(r)) {
        throw std::runtime_error(std::string("vocab file lacks reserved token ") + r);
      }
    }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocab file " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  TokenId add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  void add_text(std::string_view text) {
    for (auto& t : tokenize(text)) add(t);
  }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unknown_id() : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  TokenId start_id() const { return index_.at(kStart); }
  TokenId pad_id() const { return index_.at(kPad); }
  TokenId unknown_id() const { return index_.at(kUnknown); }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  struct Empty {};
  explicit Vocab(Empty) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

enum class SentenceTag { kMaster, kAction };

struct Sentence {
  SentenceTag tag = SentenceTag::kMaster;
  std::string text;
  std::vector<std::string> tokens;

  static Sentence make(std::string text, SentenceTag tag) {
    Sentence s;
    s.tag = tag;
    s.tokens = tokenize(text);
    s.text = std::move(text);
    return s;
  }

  bool operator==(const Sentence&) const = default;
};

// Chronological master/action history bounded to `max_sentences`.
struct Trajectory {
  std::size_t max_sentences = 21;
  std::deque<Sentence> sentences;

  std::size_t size() const { return sentences.size(); }
  bool operator==(const Trajectory&) const = default;
};

// Appends and drops the oldest sentences until the bound holds.
inline Trajectory append_and_trim(Trajectory traj, Sentence sentence) {
  traj.sentences.push_back(std::move(sentence));
  while (traj.sentences.size() > traj.max_sentences) traj.sentences.pop_front();
  return traj;
}

inline Trajectory append_and_trim(Trajectory traj, std::string text, SentenceTag tag) {
  return append_and_trim(std::move(traj), Sentence::make(std::move(text), tag));
}

struct TokenIds {
  std::vector<TokenId> ids;
  std::vector<TokenId> positions;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenIds&) const = default;
};

// Concatenates sentence tokens, keeps the most recent `max_tokens` and
// numbers positions 0..L-1 after truncation.
inline TokenIds to_ids(const Trajectory& traj, const Vocab& vocab, std::size_t max_tokens) {
  if (max_tokens == 0) throw std::invalid_argument("to_ids: max_tokens must be >= 1");
  std::vector<TokenId> all;
  for (const auto& s : traj.sentences)
    for (const auto& t : s.tokens) all.push_back(vocab.id(t));
  TokenIds out;
  std::size_t drop = all.size() > max_tokens ? all.size() - max_tokens : 0;
  out.ids.assign(all.begin() + static_cast<std::ptrdiff_t>(drop), all.end());
  out.positions.resize(out.ids.size());
  for (std::size_t i = 0; i < out.positions.size(); ++i)
    out.positions[i] = static_cast<TokenId>(i);
  return out;
}

}  // namespace trajq
