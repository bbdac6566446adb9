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

#include "synvita/captions.hpp"

#include <algorithm>
#include <cctype>

#include "synvita/errors.hpp"

namespace synvita {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::string TokenSeq::joined() const { return join(tokens); }

std::size_t SharedCaption::length() const {
  return static_cast<std::size_t>(std::count(mask_pos.begin(), mask_pos.end(), true));
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    std::size_t begin = i;
    while (i < n && !is_space(text[i])) ++i;
    std::size_t end = i;
    while (begin < end && is_punct(text[begin])) ++begin;
    while (end > begin && is_punct(text[end - 1])) --end;
    if (begin == end) continue;
    std::string token(text.substr(begin, end - begin));
    for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    seq.tokens.push_back(std::move(token));
    seq.spans.emplace_back(begin, end);
  }
  return seq;
}

SharedCaption lcs(const TokenSeq& a, const TokenSeq& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  // table[i][j] = LCS length of a[0, i) and b[0, j)
  std::vector<std::size_t> table((n + 1) * (m + 1), 0);
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (a.tokens[i - 1] == b.tokens[j - 1]) {
        table[at(i, j)] = table[at(i - 1, j - 1)] + 1;
      } else {
        table[at(i, j)] = std::max(table[at(i - 1, j)], table[at(i, j - 1)]);
      }
    }
  }

  SharedCaption out;
  out.mask_pos.assign(n, false);
  out.mask_neg.assign(m, false);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 && j > 0) {
    if (a.tokens[i - 1] == b.tokens[j - 1]) {
      out.mask_pos[i - 1] = true;
      out.mask_neg[j - 1] = true;
      --i;
      --j;
    } else if (table[at(i - 1, j)] >= table[at(i, j - 1)]) {
      --i;
    } else {
      --j;
    }
  }
  out.text = join(select_tokens(a.tokens, out.mask_pos));
  return out;
}

SharedCaption shared_caption(std::string_view caption_pos, std::string_view caption_neg) {
  return lcs(tokenize(caption_pos), tokenize(caption_neg));
}

std::vector<std::string> select_tokens(const std::vector<std::string>& seq,
                                       const std::vector<bool>& mask) {
  if (seq.size() != mask.size()) {
    throw DataError("mask length " + std::to_string(mask.size()) +
                    " does not match token count " + std::to_string(seq.size()));
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (mask[i]) out.push_back(seq[i]);
  }
  return out;
}

}  // namespace synvita
