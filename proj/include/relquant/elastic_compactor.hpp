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

#ifndef RELQUANT_ELASTIC_COMPACTOR_HPP_
#define RELQUANT_ELASTIC_COMPACTOR_HPP_

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "relquant/dyadic.hpp"
#include "relquant/errors.hpp"

namespace relquant {

template <typename T>
struct compaction_record {
  uint64_t blocks;           // blocks covered by the compacted suffix
  std::optional<T> min_key;  // smallest compacted key, absent if suffix empty
  bool coin_even;            // true: kept even-indexed, false: odd-indexed
  uint64_t removed = 0;      // keys cleared from the suffix
  uint64_t emitted = 0;      // keys passed downstream (each standing for two)
};

template <typename T>
struct reset_record {
  bool had_keys;
  std::optional<T> min_key;  // smallest stored key at reset time
};

/// A resizable compacting buffer over a totally ordered key type.
///
/// Keys are kept globally sorted in an array of blocks of size k. A
/// compaction empties a suffix of blocks and emits either all odd-indexed or
/// all even-indexed keys of that suffix (each emitted key standing for two
/// input keys). Which suffix gets compacted is driven by a per-block binary
/// progress measure z in [0, 1): shrinking to l blocks raises z to the next
/// multiple of 2^-l and compacts from just past its lowest set bit. When z
/// would reach 1 the compactor throws capacity_exhausted; keeping z below 1
/// is the caller's responsibility via its choice of space sequence.
///
/// Two insertion disciplines are provided:
///  - insert_batch(): grow to twice the current space, merge, shrink back.
///    Every call advances z, so the space sequence must stay feasible.
///  - insert_fixed(): classic fixed-size discipline; z advances only when the
///    array is full, by 2^-(b-1), and the block count never changes.
///
/// Instrumentation (construction-time flag) records every compaction, every
/// reset, the emitted and removed streams, and an exact shadow sum of
/// 2^-ceil(s/k) over all resize calls; benchmark builds pay nothing for it.
template <typename T, typename Compare = std::less<T>>
class elastic_compactor {
 public:
  elastic_compactor(uint32_t k, uint64_t initial_space, uint64_t seed,
                    bool instrument = false, Compare comp = Compare())
      : k_(k), comp_(comp), engine_(seed), instrument_(instrument) {
    if (k == 0) throw std::invalid_argument("block size k must be positive");
    block_count_ = ceil_div(initial_space, k_);
    z_.assign(block_count_, 0);
  }

  uint32_t k() const { return k_; }
  uint64_t block_count() const { return block_count_; }
  uint64_t capacity() const { return block_count_ * k_; }
  uint64_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<T>& items() const { return items_; }
  uint64_t emitted_count() const { return emitted_count_; }

  /// Count of stored keys strictly smaller than x.
  uint64_t rank_in_memory(const T& x) const {
    return static_cast<uint64_t>(
        std::lower_bound(items_.begin(), items_.end(), x, comp_) -
        items_.begin());
  }

  const T& max_key() const {
    if (items_.empty()) throw std::out_of_range("compactor is empty");
    return items_.back();
  }

  /// Replaces the stored keys wholesale (they are sorted on the way in).
  /// Handy for setting up exact scenarios; never used on the streaming path.
  void replace_items(std::vector<T> xs) {
    std::sort(xs.begin(), xs.end(), comp_);
    if (xs.size() > capacity())
      throw std::invalid_argument("contents exceed the allocated space");
    items_ = std::move(xs);
  }

  /// Removes and returns the largest stored key.
  T remove_max() {
    if (items_.empty()) throw std::out_of_range("compactor is empty");
    T out = std::move(items_.back());
    items_.pop_back();
    if (instrument_) removed_log_.push_back(out);
    return out;
  }

  /// Compacts blocks start_block..b (1-based). Emits every other key of the
  /// suffix (fair coin picks the parity), empties those blocks, and returns
  /// the emitted keys in sorted order.
  std::vector<T> compact(uint64_t start_block) {
    if (start_block < 1 || start_block > block_count_)
      throw std::out_of_range("compaction start block out of range");
    bool keep_even = coin_flip();
    size_t first = static_cast<size_t>((start_block - 1) * k_);
    std::vector<T> out;
    if (first < items_.size()) {
      size_t count = items_.size() - first;
      out.reserve((count + 1) / 2);
      // 1-based indexing within the suffix: odd = offsets 0,2,4,...
      for (size_t off = keep_even ? 1 : 0; off < count; off += 2)
        out.push_back(items_[first + off]);
      if (instrument_) {
        log_.push_back({block_count_ - start_block + 1,
                        std::optional<T>(items_[first]), keep_even,
                        static_cast<uint64_t>(count),
                        static_cast<uint64_t>(out.size())});
        emitted_log_.insert(emitted_log_.end(), out.begin(), out.end());
      }
      items_.resize(first);
    } else if (instrument_) {
      log_.push_back(
          {block_count_ - start_block + 1, std::nullopt, keep_even, 0, 0});
    }
    emitted_count_ += out.size();
    return out;
  }

  /// Resizes the allocated space to s_prime. Pure expansion when the target
  /// block count covers the stored keys and does not shrink the array;
  /// otherwise advances z, compacts, and releases the blocks past the target.
  std::vector<T> resize(uint64_t s_prime) {
    uint64_t l = ceil_div(s_prime, k_);
    if (instrument_) shadow_.add_pow2_neg(l);
    if (items_.size() <= l * k_ && l >= block_count_) {
      block_count_ = l;
      z_.resize(static_cast<size_t>(l), 0);
      return {};
    }
    assert(items_.size() <= block_count_ * k_);
    uint64_t r = raise_z_to_multiple(l);
    std::vector<T> out = compact(r + 1);
    // blocks past l are empty now: r <= l and the compaction cleared r+1..b
    assert(items_.size() <= l * k_);
    block_count_ = l;
    z_.resize(static_cast<size_t>(l), 0);
    return out;
  }

  /// Inserts a batch of at most capacity() keys: grows to twice the current
  /// space, merges, and shrinks back. Returns whatever the shrink emits.
  std::vector<T> insert_batch(const std::vector<T>& xs) {
    uint64_t s = capacity();
    if (xs.size() > s)
      throw std::invalid_argument("batch larger than current space");
    resize(2 * s);
    merge_in(xs);
    return resize(s);
  }

  /// Fixed-size insertion: keeps the block count constant and compacts with
  /// the full-array schedule whenever space runs out.
  std::vector<T> insert_fixed(const std::vector<T>& xs) {
    if (block_count_ < 2)
      throw std::invalid_argument("fixed insertion needs at least two blocks");
    std::vector<T> out;
    size_t taken = 0;
    while (taken < xs.size()) {
      uint64_t room = capacity() - items_.size();
      if (room == 0) {
        auto emitted = compact_full();
        out.insert(out.end(), emitted.begin(), emitted.end());
        continue;
      }
      size_t chunk = std::min<size_t>(room, xs.size() - taken);
      merge_in({xs.begin() + taken, xs.begin() + taken + chunk});
      taken += chunk;
    }
    return out;
  }

  /// Zeroes the progress measure; stored keys are untouched.
  void reset() {
    std::fill(z_.begin(), z_.end(), 0);
    if (instrument_) {
      shadow_.clear();
      reset_log_.push_back(
          {!items_.empty(), items_.empty() ? std::nullopt
                                           : std::optional<T>(items_.front())});
    }
  }

  /// Number of logged compactions whose smallest compacted key is <= x.
  uint64_t important_compaction_count(const T& x) const {
    require_instrumented();
    uint64_t n = 0;
    for (const auto& rec : log_)
      if (rec.min_key && !comp_(x, *rec.min_key)) ++n;
    return n;
  }

  bool instrumented() const { return instrument_; }
  const std::vector<compaction_record<T>>& compaction_log() const {
    require_instrumented();
    return log_;
  }
  const std::vector<reset_record<T>>& resets() const {
    require_instrumented();
    return reset_log_;
  }
  const std::vector<T>& emitted_log() const {
    require_instrumented();
    return emitted_log_;
  }
  const std::vector<T>& removed_log() const {
    require_instrumented();
    return removed_log_;
  }

  /// z as a long double; bits beyond the mantissa are dropped, which can only
  /// under-report. Exact checks should go through z_leq_shadow().
  long double z_value() const {
    long double v = 0.0L;
    for (size_t i = 0; i < z_.size(); ++i)
      if (z_[i]) v += std::ldexp(1.0L, -static_cast<int>(i + 1));
    return v;
  }

  const std::vector<uint8_t>& z_bits() const { return z_; }

  /// Exact comparison of the progress measure against the shadow sum of
  /// 2^-ceil(s/k) accumulated over every resize since the last reset.
  bool z_leq_shadow() const {
    require_instrumented();
    return shadow_.frac_geq(z_);
  }

  long double shadow_value() const {
    require_instrumented();
    return shadow_.to_long_double();
  }

  // State round-tripping for sketch snapshots. The writer/reader handle keys;
  // everything else is plain text.
  template <typename KeyWriter>
  void save_state(std::ostream& os, KeyWriter&& write_key) const {
    os << k_ << ' ' << block_count_ << ' ' << emitted_count_ << '\n';
    os << z_.size();
    for (uint8_t b : z_) os << ' ' << int(b);
    os << '\n';
    os << items_.size();
    for (const T& v : items_) {
      os << ' ';
      write_key(os, v);
    }
    os << '\n' << engine_ << '\n';
  }

  template <typename KeyReader>
  void load_state(std::istream& is, KeyReader&& read_key) {
    is >> k_ >> block_count_ >> emitted_count_;
    size_t zn;
    is >> zn;
    z_.assign(zn, 0);
    for (size_t i = 0; i < zn; ++i) {
      int b;
      is >> b;
      z_[i] = static_cast<uint8_t>(b);
    }
    size_t n;
    is >> n;
    items_.clear();
    items_.reserve(n);
    for (size_t i = 0; i < n; ++i) items_.push_back(read_key(is));
    is >> engine_;
  }

 private:
  static uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

  void require_instrumented() const {
    if (!instrument_)
      throw std::logic_error("compactor instrumentation is disabled");
  }

  bool coin_flip() {
    return (engine_() & 1u) != 0;
  }

  void merge_in(const std::vector<T>& xs) {
    if (xs.empty()) return;
    std::vector<T> sorted = xs;
    std::sort(sorted.begin(), sorted.end(), comp_);
    size_t old = items_.size();
    items_.insert(items_.end(), sorted.begin(), sorted.end());
    std::inplace_merge(items_.begin(), items_.begin() + old, items_.end(),
                       comp_);
  }

  /// Raises z to the next multiple of 2^-l strictly above its current value
  /// and clears all bits past position l. Returns the (1-based) position of
  /// the lowest set bit of the new z. Throws when z would reach 1.
  uint64_t raise_z_to_multiple(uint64_t l) {
    if (z_.size() < l) z_.resize(static_cast<size_t>(l), 0);
    size_t i = static_cast<size_t>(l);
    while (i > 0 && z_[i - 1]) {
      z_[i - 1] = 0;
      --i;
    }
    if (i == 0) throw capacity_exhausted("compactor progress measure hit 1");
    z_[i - 1] = 1;
    // trailing ones were consumed by the carry; bits past l must all be 0
    std::fill(z_.begin() + static_cast<size_t>(l), z_.end(), 0);
    return static_cast<uint64_t>(i);
  }

  /// Full-array compaction step for the fixed-size discipline: advance z by
  /// 2^-(b-1) and compact from just past its lowest set bit.
  std::vector<T> compact_full() {
    uint64_t b = block_count_;
    size_t i = static_cast<size_t>(b - 1);
    while (i > 0 && z_[i - 1]) {
      z_[i - 1] = 0;
      --i;
    }
    if (i == 0) throw capacity_exhausted("compactor progress measure hit 1");
    z_[i - 1] = 1;
    if (instrument_) shadow_.add_pow2_neg(b - 1);
    return compact(static_cast<uint64_t>(i) + 1);
  }

  uint32_t k_;
  Compare comp_;
  uint64_t block_count_ = 0;
  std::vector<T> items_;
  std::vector<uint8_t> z_;  // z_[i] is the bit of block i+1
  uint64_t emitted_count_ = 0;
  std::mt19937_64 engine_;

  bool instrument_;
  dyadic_sum shadow_;
  std::vector<compaction_record<T>> log_;
  std::vector<reset_record<T>> reset_log_;
  std::vector<T> emitted_log_;
  std::vector<T> removed_log_;
};

}  // namespace relquant

#endif  // RELQUANT_ELASTIC_COMPACTOR_HPP_
