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

#ifndef RELQUANT_TOPQ_SKETCH_HPP_
#define RELQUANT_TOPQ_SKETCH_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "relquant/elastic_compactor.hpp"

namespace relquant {

struct topq_params {
  uint32_t k = 2;             // compactor block size
  uint32_t levels = 0;        // compactor count; the buffer sits at index levels
  double base_weight = 1.0;   // weight carried by a key at level 0
  double sample_prob = 1.0;   // raw keys enter with this probability
  uint32_t direct_level = 0;  // landing level when the sampler is omitted
  uint64_t buffer_cap = 0;
  bool buffer_discard = true;  // drop largest buffer keys beyond buffer_cap
  bool fixed_size = false;     // classic full-triggered compaction, no resizes
  uint64_t initial_space = 0;  // per-compactor space
};

/// Parameters for a resizable sketch answering rank queries of rank <= R with
/// additive error eps*R, where eps = 2^-eps_exp. Raw keys pass a sampler with
/// probability 1/(eps^2 R); when that probability reaches 1 the sampler is
/// omitted and keys land directly on the level whose key weight is 1, which
/// requires eps^2 R to be a power of two.
inline topq_params standalone_topq_params(uint32_t eps_exp, uint64_t R,
                                          uint64_t space) {
  if (R == 0) throw std::invalid_argument("R must be positive");
  topq_params p;
  uint32_t m = eps_exp;
  p.k = m == 0 ? 2 : (1u << m);
  p.levels = m;
  p.buffer_cap = uint64_t{1} << m;
  p.buffer_discard = true;
  p.initial_space = space;
  double eps2R = std::ldexp(static_cast<double>(R), -2 * static_cast<int>(m));
  if (eps2R >= 1.0) {
    p.base_weight = eps2R;
    p.sample_prob = 1.0 / eps2R;
  } else {
    // direct insertion at the weight-1 level
    if ((R & (R - 1)) != 0 || R < (uint64_t{1} << m))
      throw std::invalid_argument(
          "direct insertion needs eps^2*R a power of two and R >= 1/eps");
    uint32_t t = static_cast<uint32_t>(std::countr_zero(R));
    p.base_weight = std::ldexp(1.0, static_cast<int>(t) - 2 * static_cast<int>(m));
    p.sample_prob = 1.0;
    p.direct_level = 2 * m - t;
  }
  return p;
}

/// Fixed-size variant: block size floor(1/(eps*sqrt(log2 n))) rounded up to an
/// even minimum of 2, per-compactor space ceil(sqrt(log2 n)/eps) rounded up to
/// a block multiple, never resized.
inline topq_params fixed_topq_params(uint32_t eps_exp, uint64_t n, uint64_t R) {
  if (n < 4 || R == 0) throw std::invalid_argument("need n >= 4 and R > 0");
  uint32_t m = eps_exp;
  double lg = std::log2(static_cast<double>(n));
  double root = std::sqrt(lg);
  double kf = std::floor(std::ldexp(1.0, static_cast<int>(m)) / root);
  if (kf < 1.0)
    throw std::invalid_argument("eps too large for this stream length");
  uint64_t k = static_cast<uint64_t>(kf);
  if (k < 2) k = 2;
  if (k % 2 == 1) ++k;
  uint64_t s = static_cast<uint64_t>(
      std::ceil(root * std::ldexp(1.0, static_cast<int>(m))));
  s = ((s + k - 1) / k) * k;
  // enough blocks for the whole stream: the schedule absorbs about k*2^(b-1)
  // insertions, so b must reach lg(n/k) with a little headroom
  uint64_t b_min =
      static_cast<uint64_t>(std::ceil(std::log2(double(n) / double(k)))) + 2;
  if (s / k < b_min) s = k * b_min;
  if (s < 2 * k) s = 2 * k;

  topq_params p;
  p.k = static_cast<uint32_t>(k);
  p.levels = m;
  p.buffer_cap = uint64_t{1} << m;
  p.buffer_discard = true;
  p.fixed_size = true;
  p.initial_space = s;
  double eps2R = std::ldexp(static_cast<double>(R), -2 * static_cast<int>(m));
  if (eps2R >= 1.0) {
    p.base_weight = eps2R;
    p.sample_prob = 1.0 / eps2R;
  } else {
    // sampling probability capped at 1; keys keep weight 1
    p.base_weight = 1.0;
    p.sample_prob = 1.0;
    p.direct_level = 0;
  }
  return p;
}

/// A sampler, a chain of compactors, and a bounded buffer.
///
/// Level j keys carry weight base_weight * 2^j; the buffer's keys carry
/// base_weight * 2^levels. Each compactor's output cascades into the next
/// level; the last compactor feeds the buffer. In standalone mode the buffer
/// keeps its smallest buffer_cap keys and discards the rest; with discarding
/// off the owner is responsible for bounding the total weight.
template <typename T, typename Compare = std::less<T>>
class topq_sketch {
 public:
  using compactor_type = elastic_compactor<T, Compare>;

  topq_sketch(const topq_params& p, uint64_t seed, bool instrument = false,
              Compare comp = Compare())
      : p_(p), comp_(comp), instrument_(instrument) {
    std::seed_seq base_seq{seed, uint64_t{0x746f7071}};
    std::vector<uint64_t> seeds(p.levels + 1);
    base_seq.generate(seeds.begin(), seeds.end());
    engine_.seed(seeds[p.levels]);
    levels_.reserve(p.levels);
    for (uint32_t j = 0; j < p.levels; ++j)
      levels_.emplace_back(p.k, p.initial_space, seeds[j], instrument, comp);
    space_ = p.initial_space;
    if (p.sample_prob < 1.0) {
      long double thr = std::ceil(
          static_cast<long double>(p.sample_prob) * 18446744073709551616.0L);
      threshold_ = static_cast<uint64_t>(thr);
    } else {
      threshold_ = std::numeric_limits<uint64_t>::max();
    }
  }

  const topq_params& params() const { return p_; }
  uint64_t space() const { return space_; }
  uint32_t level_count() const { return p_.levels; }
  const compactor_type& level(uint32_t j) const { return levels_.at(j); }
  compactor_type& level(uint32_t j) { return levels_.at(j); }
  const std::vector<T>& buffer() const { return buffer_; }
  uint64_t buffer_discarded() const { return buffer_discarded_; }
  uint64_t accepted_units() const { return accepted_units_; }
  uint64_t removed_units() const { return removed_units_; }

  uint64_t stored_count() const {
    uint64_t n = buffer_.size();
    for (const auto& c : levels_) n += c.size();
    return n;
  }

  /// Total stored weight in units of base_weight (level j counts 2^j).
  uint64_t total_weight_units() const {
    uint64_t u = static_cast<uint64_t>(buffer_.size()) << p_.levels;
    for (uint32_t j = 0; j < p_.levels; ++j)
      u += levels_[j].size() << j;
    return u;
  }

  std::optional<T> min_stored() const {
    std::optional<T> best;
    auto consider = [&](const T& v) {
      if (!best || comp_(v, *best)) best = v;
    };
    for (const auto& c : levels_)
      if (!c.empty()) consider(c.items().front());
    if (!buffer_.empty()) consider(buffer_.front());
    return best;
  }

  std::optional<T> max_stored() const {
    std::optional<T> best;
    auto consider = [&](const T& v) {
      if (!best || comp_(*best, v)) best = v;
    };
    for (const auto& c : levels_)
      if (!c.empty()) consider(c.items().back());
    if (!buffer_.empty()) consider(buffer_.back());
    return best;
  }

  /// One raw key through the sampler (or straight to its direct level).
  void insert(const T& x) { insert_raw_batch(std::vector<T>{x}); }

  /// A batch of raw keys in one shot: the sampler thins the batch and the
  /// survivors enter the first level together.
  void insert_raw_batch(const std::vector<T>& xs) {
    if (xs.empty()) return;
    if (p_.sample_prob >= 1.0) {
      accepted_units_ += static_cast<uint64_t>(xs.size()) << p_.direct_level;
      feed(p_.direct_level, xs);
      return;
    }
    std::vector<T> kept;
    for (const T& x : xs)
      if (engine_() < threshold_) kept.push_back(x);
    if (kept.empty()) return;
    accepted_units_ += kept.size();
    feed(0, kept);
  }

  /// Places keys of weight base_weight * 2^j directly on level j
  /// (j == level_count() addresses the buffer).
  void insert_at_level(uint32_t j, const std::vector<T>& xs) {
    if (j > p_.levels) throw std::out_of_range("no such level");
    if (xs.empty()) return;
    accepted_units_ += static_cast<uint64_t>(xs.size()) << j;
    feed(j, xs);
  }

  /// Resizes every compactor to s_prime, delivering each level's emissions
  /// into the next level before that level's own resize. Emissions travel as
  /// the individual batches they were produced in, so no batch exceeds a
  /// receiving compactor's space. The buffer size never changes.
  void resize(uint64_t s_prime) {
    if (p_.fixed_size)
      throw std::logic_error("fixed-size sketch cannot be resized");
    if (s_prime < p_.k)
      throw std::invalid_argument("space below one block");
    if (p_.levels == 0) {
      space_ = s_prime;
      return;
    }
    std::vector<std::vector<T>> incoming;
    {
      auto out0 = levels_[0].resize(s_prime);
      if (!out0.empty()) incoming.push_back(std::move(out0));
    }
    for (uint32_t j = 1; j <= p_.levels; ++j) {
      if (j == p_.levels) {
        for (auto& b : incoming) buffer_insert(b);
        break;
      }
      std::vector<std::vector<T>> next;
      for (auto& b : incoming) {
        auto out = levels_[j].insert_batch(b);
        if (!out.empty()) next.push_back(std::move(out));
      }
      auto out = levels_[j].resize(s_prime);
      if (!out.empty()) next.push_back(std::move(out));
      incoming = std::move(next);
    }
    space_ = s_prime;
  }

  /// Removes the globally largest stored key; returns it with the index of
  /// the level it came from (level_count() means the buffer). Ties go to the
  /// highest level.
  std::pair<T, uint32_t> remove_max() {
    int best = -1;  // level index; levels_.size() encodes the buffer
    const T* best_key = nullptr;
    if (!buffer_.empty()) {
      best = static_cast<int>(p_.levels);
      best_key = &buffer_.back();
    }
    for (int j = static_cast<int>(p_.levels) - 1; j >= 0; --j) {
      if (levels_[j].empty()) continue;
      const T& cand = levels_[j].items().back();
      if (best_key == nullptr || comp_(*best_key, cand)) {
        best = j;
        best_key = &cand;
      }
    }
    if (best < 0) throw std::out_of_range("sketch is empty");
    uint32_t lvl = static_cast<uint32_t>(best);
    T out;
    if (lvl == p_.levels) {
      out = std::move(buffer_.back());
      buffer_.pop_back();
    } else {
      out = levels_[lvl].remove_max();
    }
    removed_units_ += uint64_t{1} << lvl;
    return {std::move(out), lvl};
  }

  /// Zeroes every compactor's progress measure; keys stay put.
  void reset_levels() {
    for (auto& c : levels_) c.reset();
  }

  /// Total weight of stored keys smaller than x.
  double rank_estimate(const T& x) const {
    double units = std::ldexp(static_cast<double>(rank_buffer(x)),
                              static_cast<int>(p_.levels));
    for (uint32_t j = 0; j < p_.levels; ++j)
      units += std::ldexp(static_cast<double>(levels_[j].rank_in_memory(x)),
                          static_cast<int>(j));
    return p_.base_weight * units;
  }

  uint64_t rank_buffer(const T& x) const {
    return static_cast<uint64_t>(
        std::lower_bound(buffer_.begin(), buffer_.end(), x, comp_) -
        buffer_.begin());
  }

  template <typename F>
  void for_each_stored(F&& f) const {
    for (const auto& c : levels_)
      for (const T& v : c.items()) f(v);
    for (const T& v : buffer_) f(v);
  }

  /// Signed difference between the weight that entered and the weight that is
  /// stored, emitted onward, discarded, or lost to odd-count compactions.
  /// Zero whenever the bookkeeping is consistent. Instrumented builds only.
  long long conservation_gap() const {
    long long drift = 0;
    for (uint32_t j = 0; j < p_.levels; ++j)
      for (const auto& rec : levels_[j].compaction_log())
        drift += (static_cast<long long>(rec.removed) -
                  2 * static_cast<long long>(rec.emitted))
                 << j;
    long long stored = static_cast<long long>(total_weight_units());
    long long discarded = static_cast<long long>(buffer_discarded_)
                          << p_.levels;
    return static_cast<long long>(accepted_units_) - stored - drift -
           discarded - static_cast<long long>(removed_units_);
  }

  template <typename KeyWriter>
  void save_state(std::ostream& os, KeyWriter&& wk) const {
    os << space_ << ' ' << accepted_units_ << ' ' << removed_units_ << ' '
       << buffer_discarded_ << '\n';
    os << buffer_.size();
    for (const T& v : buffer_) {
      os << ' ';
      wk(os, v);
    }
    os << '\n' << engine_ << '\n';
    for (const auto& c : levels_) c.save_state(os, wk);
  }

  template <typename KeyReader>
  void load_state(std::istream& is, KeyReader&& rk) {
    is >> space_ >> accepted_units_ >> removed_units_ >> buffer_discarded_;
    size_t n;
    is >> n;
    buffer_.clear();
    buffer_.reserve(n);
    for (size_t i = 0; i < n; ++i) buffer_.push_back(rk(is));
    is >> engine_;
    for (auto& c : levels_) c.load_state(is, rk);
  }

 private:
  /// Cascades a batch from level j downward; emissions from each level enter
  /// the next one, and whatever falls off the last compactor lands in the
  /// buffer.
  void feed(uint32_t j, std::vector<T> xs) {
    for (uint32_t lvl = j; lvl < p_.levels && !xs.empty(); ++lvl)
      xs = p_.fixed_size ? levels_[lvl].insert_fixed(xs)
                         : levels_[lvl].insert_batch(xs);
    if (!xs.empty()) buffer_insert(xs);
  }

  void buffer_insert(std::vector<T>& xs) {
    if (xs.empty()) return;
    std::sort(xs.begin(), xs.end(), comp_);
    size_t old = buffer_.size();
    buffer_.insert(buffer_.end(), xs.begin(), xs.end());
    std::inplace_merge(buffer_.begin(), buffer_.begin() + old, buffer_.end(),
                       comp_);
    if (p_.buffer_discard) {
      while (buffer_.size() > p_.buffer_cap) {
        buffer_.pop_back();
        ++buffer_discarded_;
      }
    }
  }

  topq_params p_;
  Compare comp_;
  bool instrument_;
  std::vector<compactor_type> levels_;
  std::vector<T> buffer_;  // sorted
  uint64_t space_ = 0;
  uint64_t buffer_discarded_ = 0;
  uint64_t accepted_units_ = 0;
  uint64_t removed_units_ = 0;
  std::mt19937_64 engine_;
  uint64_t threshold_;
};

}  // namespace relquant

#endif  // RELQUANT_TOPQ_SKETCH_HPP_
