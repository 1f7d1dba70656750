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

#ifndef RELQUANT_SCALE_SKETCH_HPP_
#define RELQUANT_SCALE_SKETCH_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "relquant/params.hpp"
#include "relquant/topq_sketch.hpp"

namespace relquant {

/// The sketch responsible for ranks around R = 2^i / eps: a top-quantiles
/// hierarchy whose buffer never discards, capped at total weight 3R. When an
/// insertion pushes the weight past 3R the owner drains the largest keys down
/// to weight 2R and moves them, with their weights, one scale up.
///
/// Keys are weighted by absolute powers of two. This scale stores exponents
/// elo..ebuf (buffer at ebuf); raw keys enter at the nominal exponent
/// e0 = i + e0_shift, through a sampler when e0 > 0 and at weight 1 directly
/// when e0 <= 0. Migrated keys land on the level matching their exponent; a
/// key one rung below elo is kept with probability 1/2 at level elo, which
/// preserves its expected weight.
template <typename T, typename Compare = std::less<T>>
class scale_sketch {
 public:
  scale_sketch(uint32_t scale, const sketch_params& sp, uint64_t master_seed,
               uint64_t initial_space, bool instrument = false,
               Compare comp = Compare())
      : scale_(scale),
        comp_(comp),
        instrument_(instrument),
        elo_(sp.elo_eff(scale)),
        ebuf_(sp.ebuf_eff(scale)),
        sketch_(make_params(scale, sp, initial_space), derive_seed(master_seed, scale, 1),
                instrument, comp) {
    if (sp.r_log(scale) >= 62) throw std::invalid_argument("scale too deep");
    r_units_ = uint64_t{1} << (sp.r_log(scale) - static_cast<uint32_t>(elo_));
    migrate_engine_.seed(derive_seed(master_seed, scale, 2));
  }

  uint32_t scale() const { return scale_; }
  int elo() const { return elo_; }
  int ebuf() const { return ebuf_; }
  uint64_t r_units() const { return r_units_; }
  uint64_t total_weight_units() const { return sketch_.total_weight_units(); }
  bool over_cap() const { return total_weight_units() > 3 * r_units_; }
  bool empty() const { return sketch_.stored_count() == 0; }
  uint64_t stored_count() const { return sketch_.stored_count(); }
  std::optional<T> min_stored() const { return sketch_.min_stored(); }
  std::optional<T> max_stored() const { return sketch_.max_stored(); }
  bool ever_crossed_r() const { return crossed_; }

  topq_sketch<T, Compare>& hierarchy() { return sketch_; }
  const topq_sketch<T, Compare>& hierarchy() const { return sketch_; }

  /// One batch of raw stream keys through the sampler (a single time step).
  void flush_raw_batch(const std::vector<T>& xs) {
    if (instrument_)
      for (const T& x : xs) input_log_.push_back({x, 0});
    sketch_.insert_raw_batch(xs);
    note_weight();
  }

  /// Drains the largest keys until the weight is at most 2R. Returns
  /// (key, absolute weight exponent) pairs in non-decreasing key order.
  std::vector<std::pair<T, int>> drain_overflow() {
    std::vector<std::pair<T, int>> batch;
    while (sketch_.total_weight_units() > 2 * r_units_) {
      auto [key, lvl] = sketch_.remove_max();
      batch.emplace_back(std::move(key), elo_ + static_cast<int>(lvl));
    }
    std::reverse(batch.begin(), batch.end());
    if (instrument_)
      outflow_log_.insert(outflow_log_.end(), batch.begin(), batch.end());
    return batch;
  }

  /// Weight of the keys moved out of this scale that are smaller than x.
  /// Instrumented builds only.
  double outflow_rank(const T& x) const {
    if (!instrument_) throw std::logic_error("instrumentation is disabled");
    double r = 0.0;
    for (const auto& [key, e] : outflow_log_)
      if (comp_(key, x)) r += std::ldexp(1.0, e);
    return r;
  }

  /// Keys of one incoming weight 2^abs_exp, already chunked by the caller to
  /// fit one batch insertion. Half-weight keys are thinned by a fair coin.
  void receive_migrated(int abs_exp, const std::vector<T>& keys) {
    if (instrument_)
      for (const T& x : keys) input_log_.push_back({x, abs_exp});
    if (abs_exp == elo_ - 1) {
      std::vector<T> kept;
      for (const T& x : keys)
        if (migrate_engine_() & 1u) kept.push_back(x);
      if (!kept.empty()) sketch_.insert_at_level(0, kept);
    } else if (abs_exp >= elo_ && abs_exp <= ebuf_) {
      sketch_.insert_at_level(static_cast<uint32_t>(abs_exp - elo_), keys);
    } else {
      throw std::invalid_argument("migrated weight not representable");
    }
    note_weight();
  }

  void resize(uint64_t space) { sketch_.resize(space); }

  /// Zeroes every compactor's progress measure and logs the stored minimum,
  /// from which importance for any query is recovered later.
  void reset() {
    sketch_.reset_levels();
    reset_log_.push_back(sketch_.min_stored());
  }

  double rank_estimate(const T& x) const { return sketch_.rank_estimate(x); }

  /// Resets that held at least one key at most x at the time they fired.
  uint64_t important_resets(const T& x) const {
    uint64_t n = 0;
    for (const auto& m : reset_log_)
      if (m && !comp_(x, *m)) ++n;
    return n;
  }

  uint64_t reset_count() const { return reset_log_.size(); }

  /// Rank of x in this scale's input stream, counting migrated keys with
  /// their weight. Instrumented builds only.
  double input_rank(const T& x) const {
    if (!instrument_) throw std::logic_error("instrumentation is disabled");
    double r = 0.0;
    for (const auto& [key, e] : input_log_)
      if (comp_(key, x)) r += std::ldexp(1.0, e);
    return r;
  }

  template <typename KeyWriter>
  void save_state(std::ostream& os, KeyWriter&& wk) const {
    os << scale_ << ' ' << (crossed_ ? 1 : 0) << ' ' << reset_log_.size();
    for (const auto& m : reset_log_) {
      os << ' ' << (m ? 1 : 0);
      if (m) {
        os << ' ';
        wk(os, *m);
      }
    }
    os << '\n' << migrate_engine_ << '\n';
    sketch_.save_state(os, wk);
  }

  template <typename KeyReader>
  void load_state(std::istream& is, KeyReader&& rk) {
    int crossed;
    size_t nresets;
    is >> scale_ >> crossed >> nresets;
    crossed_ = crossed != 0;
    reset_log_.clear();
    for (size_t i = 0; i < nresets; ++i) {
      int has;
      is >> has;
      if (has)
        reset_log_.push_back(rk(is));
      else
        reset_log_.push_back(std::nullopt);
    }
    is >> migrate_engine_;
    sketch_.load_state(is, rk);
  }

 private:
  static uint64_t derive_seed(uint64_t master, uint32_t scale, uint32_t tag) {
    std::seed_seq seq{master, static_cast<uint64_t>(scale),
                      static_cast<uint64_t>(tag)};
    uint64_t out[1];
    seq.generate(out, out + 1);
    return out[0];
  }

  static topq_params make_params(uint32_t scale, const sketch_params& sp,
                                 uint64_t initial_space) {
    topq_params p;
    int e0 = sp.e0_nominal(scale);
    int elo = sp.elo_eff(scale);
    int ebuf = sp.ebuf_eff(scale);
    p.k = sp.k;
    p.levels = static_cast<uint32_t>(ebuf - elo);
    p.base_weight = std::ldexp(1.0, elo);
    if (e0 > 0) {
      p.sample_prob = std::ldexp(1.0, -e0);
    } else {
      p.sample_prob = 1.0;
      p.direct_level = 0;  // weight-1 rung; the buffer itself when levels == 0
    }
    p.buffer_cap = 3 * (uint64_t{1} << (sp.r_log(scale) - ebuf));
    p.buffer_discard = false;
    p.initial_space = initial_space;
    return p;
  }

  void note_weight() {
    if (sketch_.total_weight_units() >= r_units_) crossed_ = true;
  }

  uint32_t scale_;
  Compare comp_;
  bool instrument_;
  int elo_;
  int ebuf_;
  uint64_t r_units_ = 0;
  bool crossed_ = false;
  topq_sketch<T, Compare> sketch_;
  std::mt19937_64 migrate_engine_;
  std::vector<std::optional<T>> reset_log_;
  std::vector<std::pair<T, int>> input_log_;
  std::vector<std::pair<T, int>> outflow_log_;
};

}  // namespace relquant

#endif  // RELQUANT_SCALE_SKETCH_HPP_
