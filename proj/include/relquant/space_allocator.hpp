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

#ifndef RELQUANT_SPACE_ALLOCATOR_HPP_
#define RELQUANT_SPACE_ALLOCATOR_HPP_

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace relquant {

/// Online space allocation across the per-scale sketches.
///
/// Time advances one step per batch insertion into any level of any scale and
/// per issued resize. Each scale's timeline splits into intervals delimited by
/// its resets. Every open interval carries a potential: the sum of the
/// potentials of the closed intervals one level down that intersected it,
/// plus the (snapshotted) potential of the currently open interval below;
/// below the deepest live scale sits an imaginary level whose intervals are
/// single steps of potential one, so the deepest open potential is simply the
/// number of steps the interval spans. The per-scale space target is
///
///   s_hat = mult/eps * (log2(ceil2(phi_level)/ceil2(phi_child))
///           + 5*log2(1/eps) + 5*ceil(log2 log2 max(4, T)))
///
/// with ceil2 rounding up to a power of two, mult = 1 in constant-probability
/// mode. The allocator also tracks, per scale, the running feasibility sum of
/// 2^(-s/k) over that scale's steps since its last reset; the contract with
/// the compactors is that this sum stays at most 0.25 per interval.
class space_allocator {
 public:
  space_allocator(uint32_t eps_exp, uint32_t k, uint32_t space_multiplier);

  /// One time step performed by `level` while it occupied `space`.
  void note_step(size_t level, uint64_t space);

  /// Closes the level's open interval, folds its potential into the parent,
  /// and starts a fresh interval with a zeroed feasibility sum. Levels deeper
  /// than any seen so far are materialized on the way.
  void on_reset(size_t level);

  uint64_t space_target(size_t level) const;

  uint64_t steps() const { return steps_; }
  size_t level_count() const { return levels_.size(); }
  uint64_t phi_open(size_t level) const;
  uint64_t phi_child(size_t level) const;
  uint32_t loglog_term() const;

  double feasibility_accumulator(size_t level) const;
  /// Largest per-interval feasibility sum this level ever reached.
  double max_accumulator(size_t level) const;
  /// Largest number of this level's steps falling between two consecutive
  /// boundaries of the level below (or of the level itself).
  uint64_t max_steps_per_child(size_t level) const;
  uint64_t closed_intervals(size_t level) const;
  /// Most intervals one level up that any closed interval of this level
  /// intersected.
  uint64_t max_parents(size_t level) const;

  void save_state(std::ostream& os) const;
  void load_state(std::istream& is);

 private:
  struct level_state {
    uint64_t start = 1;      // first step the open interval covers
    uint64_t committed = 0;  // potentials of closed child intervals
    long double accumulator = 0.0L;
    long double max_accumulator = 0.0L;
    uint64_t steps_since_boundary = 0;
    uint64_t max_steps_per_child = 0;
    uint64_t closed = 0;
    uint64_t parents = 1;      // intervals one level up this one has touched
    uint64_t max_parents = 0;  // largest `parents` among closed intervals
  };

  void materialize_through(size_t level);
  uint64_t open_span(const level_state& st) const;

  uint32_t eps_exp_;
  uint32_t k_;
  uint32_t multiplier_;
  uint64_t steps_ = 0;
  std::vector<level_state> levels_;
};

}  // namespace relquant

#endif  // RELQUANT_SPACE_ALLOCATOR_HPP_
