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

#ifndef SYNVITA_CAPTIONS_HPP_
#define SYNVITA_CAPTIONS_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace synvita {

// Normalized word tokens of a caption plus the character span each one
// occupies in the source text.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end)

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  std::string joined() const;
};

// The shared caption t': a longest common subsequence of the positive and
// negative captions, carried as a pair of aligned token masks.
struct SharedCaption {
  std::vector<bool> mask_pos;
  std::vector<bool> mask_neg;
  std::string text;

  std::size_t length() const;
  bool empty() const { return length() == 0; }
};

// Lowercase, split on whitespace, strip leading/trailing punctuation from
// each token and drop tokens that become empty.
TokenSeq tokenize(std::string_view text);

// Quadratic DP. Backtracking prefers a match, then skipping in `a`, then
// skipping in `b`, so ties among maximal subsequences resolve identically
// on every run.
SharedCaption lcs(const TokenSeq& a, const TokenSeq& b);

SharedCaption shared_caption(std::string_view caption_pos,
                             std::string_view caption_neg);

// Tokens of `seq` whose mask bit is set, in order.
std::vector<std::string> select_tokens(const std::vector<std::string>& seq,
                                       const std::vector<bool>& mask);

}  // namespace synvita

#endif  // SYNVITA_CAPTIONS_HPP_
