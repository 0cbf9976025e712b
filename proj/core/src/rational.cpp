// Copyright 2026 The blockrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "blockrecon/rational.hpp"

#include <cctype>

namespace blockrecon {

Rational Rational::parse(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("Rational::parse: empty input");
  auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    std::string n(text.substr(0, slash)), d(text.substr(slash + 1));
    return Rational(std::stoll(n), std::stoll(d));
  }
  bool negative = false;
  size_t i = 0;
  if (text[0] == '+' || text[0] == '-') {
    negative = text[0] == '-';
    i = 1;
  }
  int64_t num = 0;
  int64_t den = 1;
  bool seen_digit = false;
  bool in_fraction = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.') {
      if (in_fraction) throw std::invalid_argument("Rational::parse: malformed decimal");
      in_fraction = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw std::invalid_argument("Rational::parse: unexpected character in '" +
                                  std::string(text) + "'");
    }
    seen_digit = true;
    if (num > (INT64_MAX - 9) / 10 || (in_fraction && den > INT64_MAX / 10)) {
      throw std::overflow_error("Rational::parse: too many digits");
    }
    num = num * 10 + (c - '0');
    if (in_fraction) den *= 10;
  }
  if (!seen_digit) throw std::invalid_argument("Rational::parse: no digits");
  return Rational(negative ? -num : num, den);
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

}  // namespace blockrecon
