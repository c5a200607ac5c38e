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
#ifndef PHALANX_ERROR_HPP_
#define PHALANX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace phalanx {

// Malformed input text: bad row, unknown schema key, unreadable number.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input that violates a data contract: non-finite
// feature, positive-free training block, misaligned vectors.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Arithmetic failure: non-finite coefficients, exhausted redraw caps.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace phalanx

#endif  // PHALANX_ERROR_HPP_
