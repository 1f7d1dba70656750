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

#ifndef RELQUANT_DYADIC_HPP_
#define RELQUANT_DYADIC_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

namespace relquant {

/// Exact non-negative dyadic number: integer part plus a binary fraction of
/// unbounded precision. Supports only what the progress-measure bookkeeping
/// needs: adding 2^-e and ordered comparison. Bit i of the fraction (0-based)
/// is the coefficient of 2^-(i+1).
class dyadic_sum {
 public:
  dyadic_sum() = default;

  void add_pow2_neg(uint64_t e) {
    if (e == 0) {
      ++integer_;
      return;
    }
    if (frac_.size() < e) frac_.resize(e, 0);
    // carry propagates toward the more significant (lower-index) bits
    size_t i = static_cast<size_t>(e);
    while (i > 0 && frac_[i - 1]) {
      frac_[i - 1] = 0;
      --i;
    }
    if (i == 0) {
      ++integer_;
    } else {
      frac_[i - 1] = 1;
    }
  }

  void clear() {
    integer_ = 0;
    frac_.clear();
  }

  uint64_t integer_part() const { return integer_; }

  /// Compares the fraction's bits against another bit vector
  /// (bit j of `bits` is the coefficient of 2^-(j+1)).
  /// Returns true when this value is >= the fraction encoded by `bits`.
  bool frac_geq(const std::vector<uint8_t>& bits) const {
    if (integer_ > 0) return true;
    size_t n = std::max(frac_.size(), bits.size());
    for (size_t i = 0; i < n; ++i) {
      uint8_t a = i < frac_.size() ? frac_[i] : 0;
      uint8_t b = i < bits.size() ? bits[i] : 0;
      if (a != b) return a > b;
    }
    return true;
  }

  long double to_long_double() const {
    long double v = static_cast<long double>(integer_);
    for (size_t i = 0; i < frac_.size(); ++i) {
      if (frac_[i]) v += std::ldexp(1.0L, -static_cast<int>(i + 1));
    }
    return v;
  }

 private:
  uint64_t integer_ = 0;
  std::vector<uint8_t> frac_;
};

}  // namespace relquant

#endif  // RELQUANT_DYADIC_HPP_
