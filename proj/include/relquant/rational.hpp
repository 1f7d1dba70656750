// Copyright 2026 The relquant Authors
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

#ifndef RELQUANT_RATIONAL_HPP_
#define RELQUANT_RATIONAL_HPP_

#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace relquant {

/// Exact rational label for stream keys. Lets generators and the adversary
/// place a new key strictly between any two existing keys without touching
/// floating point. Always normalized with a positive denominator.
struct rational {
  long long num = 0;
  long long den = 1;

  rational() = default;
  rational(long long n) : num(n), den(1) {}  // NOLINT: implicit by design
  rational(long long n, long long d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  friend bool operator<(const rational& a, const rational& b) {
    return static_cast<__int128>(a.num) * b.den <
           static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator==(const rational& a, const rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator!=(const rational& a, const rational& b) {
    return !(a == b);
  }
  friend bool operator>(const rational& a, const rational& b) { return b < a; }
  friend bool operator<=(const rational& a, const rational& b) {
    return !(b < a);
  }
  friend bool operator>=(const rational& a, const rational& b) {
    return !(a < b);
  }

  friend rational midpoint(const rational& a, const rational& b) {
    return affine_between(a, b, 1, 2);
  }

  /// a + (b-a)*j/parts, exactly.
  friend rational affine_between(const rational& a, const rational& b,
                                 uint64_t j, uint64_t parts) {
    __int128 n = static_cast<__int128>(a.num) * b.den *
                     static_cast<__int128>(parts - j) +
                 static_cast<__int128>(b.num) * a.den * static_cast<__int128>(j);
    __int128 d = static_cast<__int128>(a.den) * b.den *
                 static_cast<__int128>(parts);
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX)
      throw std::overflow_error("rational label overflow");
    return rational(static_cast<long long>(n), static_cast<long long>(d));
  }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

  friend std::ostream& operator<<(std::ostream& os, const rational& r) {
    return os << r.str();
  }
};

/// Parses "p" or "p/q". Throws on anything else.
rational parse_rational(const std::string& s);

}  // namespace relquant

#endif  // RELQUANT_RATIONAL_HPP_
