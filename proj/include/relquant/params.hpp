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

#ifndef RELQUANT_PARAMS_HPP_
#define RELQUANT_PARAMS_HPP_

#include <bit>
#include <cstdint>
#include <stdexcept>

namespace relquant {

/// Accuracy/size parameters shared by every scale of the full sketch.
///
/// eps = 2^-eps_exp. Scale i is responsible for ranks around 2^i / eps and
/// its keys live on weight ladder rungs 2^e for integer exponents e between
/// e0(i) and ebuf(i); rungs below 0 are cut off, with raw keys entering at
/// weight 1 (sampler omitted) whenever e0(i) <= 0.
///
/// The high-probability mode keeps the exact same structure and changes only
/// these constants: block size c*(loglog(1/delta))^2/eps with c = 128, sample
/// weight eps^2*R/(c*log(1/delta)), buffer capacity 3k, and a
/// (loglog(1/delta))^3 multiplier on allocated space. log(1/delta) and
/// loglog(1/delta) are rounded up to powers of two so the ladder stays dyadic.
struct sketch_params {
  uint32_t eps_exp = 6;  // eps = 1/64
  bool high_prob = false;
  uint32_t delta_log = 0;  // log2(1/delta), only in high-probability mode

  // derived
  uint32_t k = 0;
  int e0_shift = 0;    // nominal entry exponent of scale i is i + e0_shift
  int ebuf_shift = 0;  // buffer exponent of scale i is i + ebuf_shift
  uint32_t space_multiplier = 1;
  uint64_t staging_cap = 1;

  static sketch_params make(uint32_t eps_exp, bool high_prob = false,
                            uint32_t delta_log = 1) {
    if (eps_exp > 30) throw std::invalid_argument("eps too small");
    sketch_params p;
    p.eps_exp = eps_exp;
    p.high_prob = high_prob;
    p.staging_cap = uint64_t{1} << eps_exp;
    uint32_t m = eps_exp;
    if (!high_prob) {
      p.k = m == 0 ? 2 : (1u << m);
      p.e0_shift = -static_cast<int>(m);
      p.ebuf_shift = 0;
      p.space_multiplier = 1;
      return p;
    }
    if (delta_log == 0)
      throw std::invalid_argument("delta must be at most 1/2");
    p.delta_log = delta_log;
    // lambda: log2(1/delta) rounded up to a power of two, as an exponent
    uint32_t lambda =
        delta_log <= 1 ? 0 : static_cast<uint32_t>(std::bit_width(delta_log - 1));
    uint32_t ll = std::bit_ceil(std::max<uint32_t>(1, lambda));
    uint32_t lg_ll = static_cast<uint32_t>(std::countr_zero(ll));
    if (7 + 2 * lg_ll + m > 30)
      throw std::invalid_argument("block size overflow in high-prob mode");
    p.k = 1u << (7 + 2 * lg_ll + m);
    p.e0_shift = -static_cast<int>(m) - 7 - static_cast<int>(lambda);
    p.ebuf_shift = -7 - 2 * static_cast<int>(lg_ll);
    if (p.ebuf_shift - p.e0_shift < 1)
      throw std::invalid_argument("delta too large for this eps");
    p.space_multiplier = ll * ll * ll;
    return p;
  }

  int e0_nominal(uint32_t scale) const {
    return static_cast<int>(scale) + e0_shift;
  }
  int ebuf_eff(uint32_t scale) const {
    int e = static_cast<int>(scale) + ebuf_shift;
    return e < 0 ? 0 : e;
  }
  int elo_eff(uint32_t scale) const {
    int e = e0_nominal(scale);
    if (e < 0) e = 0;
    int cap = ebuf_eff(scale);
    return e > cap ? cap : e;
  }
  /// log2 of R_i = 2^i / eps.
  uint32_t r_log(uint32_t scale) const { return scale + eps_exp; }
};

}  // namespace relquant

#endif  // RELQUANT_PARAMS_HPP_
