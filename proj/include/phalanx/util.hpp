/*
 * Copyright 2026 The Phalanx Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef PHALANX_UTIL_HPP_
#define PHALANX_UTIL_HPP_

#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phalanx {

// 17 significant digits: enough to reproduce any IEEE double exactly, and
// re-formatting the parsed value yields the identical string.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string format_fixed(double x, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, x);
  return buf;
}

// Splits on single-character delimiter, keeping empty fields.
std::vector<std::string_view> split_char(std::string_view line, char delim);

// Splits on runs of spaces/tabs, dropping empty fields.
std::vector<std::string_view> split_whitespace(std::string_view line);

// Locale-independent double parse of a whole token.
bool parse_double(std::string_view token, double& out);
bool parse_int(std::string_view token, long long& out);

// "{1,4,7}" — the canonical key for a sorted variable set.
std::string variables_to_string(std::span<const int> variables);

}  // namespace phalanx

#endif  // PHALANX_UTIL_HPP_
