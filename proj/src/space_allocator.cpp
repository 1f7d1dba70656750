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

#include "relquant/space_allocator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace relquant {

namespace {

uint64_t checked_add(uint64_t a, uint64_t b) {
  uint64_t r;
  if (__builtin_add_overflow(a, b, &r))
    throw std::overflow_error("interval potential overflow");
  return r;
}

uint32_t log2_ceil2(uint64_t v) {
  if (v < 2) return 0;
  return static_cast<uint32_t>(std::bit_width(v - 1));
}

}  // namespace

space_allocator::space_allocator(uint32_t eps_exp, uint32_t k,
                                 uint32_t space_multiplier)
    : eps_exp_(eps_exp), k_(k), multiplier_(space_multiplier) {
  levels_.emplace_back();
}

uint64_t space_allocator::open_span(const level_state& st) const {
  return steps_ >= st.start ? steps_ - st.start + 1 : 0;
}

uint64_t space_allocator::phi_open(size_t level) const {
  if (level >= levels_.size()) return 1;  // empty scales reset every step
  const level_state& deepest = levels_.back();
  uint64_t phi = checked_add(deepest.committed, open_span(deepest));
  for (size_t i = levels_.size() - 1; i-- > level;)
    phi = checked_add(levels_[i].committed, phi);
  return phi;
}

uint64_t space_allocator::phi_child(size_t level) const {
  return level + 1 < levels_.size() ? phi_open(level + 1) : 1;
}

void space_allocator::materialize_through(size_t level) {
  while (levels_.size() <= level) {
    // The previously deepest level stops counting imaginary children through
    // its span; fold what it has accumulated into committed.
    level_state& deepest = levels_.back();
    deepest.committed = checked_add(deepest.committed, open_span(deepest));
    deepest.start = steps_ + 1;
    level_state fresh;
    fresh.start = steps_ + 1;
    levels_.push_back(fresh);
  }
}

void space_allocator::note_step(size_t level, uint64_t space) {
  materialize_through(level);
  ++steps_;
  level_state& st = levels_[level];
  st.accumulator +=
      std::exp2(-static_cast<long double>(space) / static_cast<long double>(k_));
  if (st.accumulator > st.max_accumulator) st.max_accumulator = st.accumulator;
  ++st.steps_since_boundary;
  if (st.steps_since_boundary > st.max_steps_per_child)
    st.max_steps_per_child = st.steps_since_boundary;
}

void space_allocator::on_reset(size_t level) {
  if (level >= levels_.size()) {
    // first reset of a fresh scale: its imaginary one-step intervals were
    // already charged to the parent, so just open the first real interval
    materialize_through(level);
    return;
  }
  level_state& st = levels_[level];
  uint64_t phi = phi_open(level);
  if (phi == 0) phi = 1;  // an interval spans at least its creation step
  if (level > 0)
    levels_[level - 1].committed =
        checked_add(levels_[level - 1].committed, phi);
  ++st.closed;
  st.max_parents = std::max(st.max_parents, st.parents);
  st.parents = 1;
  st.start = steps_ + 1;
  st.committed = 0;
  st.accumulator = 0.0L;
  st.steps_since_boundary = 0;
  if (level > 0) levels_[level - 1].steps_since_boundary = 0;
  // the open interval one level down now also overlaps this fresh interval
  if (level + 1 < levels_.size()) ++levels_[level + 1].parents;
}

uint64_t space_allocator::space_target(size_t level) const {
  uint64_t phi_l = phi_open(level);
  uint64_t phi_c = phi_child(level);
  if (phi_l == 0) phi_l = 1;
  if (phi_c == 0) phi_c = 1;
  uint32_t ratio_log = log2_ceil2(phi_l) - log2_ceil2(phi_c);
  uint64_t inner = static_cast<uint64_t>(ratio_log) + 5ull * eps_exp_ +
                   5ull * loglog_term();
  // at least `inner` blocks per compactor: with oversized blocks (the
  // high-probability constants) the plain formula would drop below a single
  // block, which is unusable and breaks the per-step feasibility budget
  uint64_t per_unit =
      std::max<uint64_t>((uint64_t{1} << eps_exp_) * multiplier_, k_);
  return per_unit * inner;
}

uint32_t space_allocator::loglog_term() const {
  uint64_t t = steps_ < 4 ? 4 : steps_;
  uint32_t lg = static_cast<uint32_t>(std::bit_width(t - 1));  // ceil(log2 t)
  return lg < 2 ? 1 : static_cast<uint32_t>(std::bit_width(uint32_t(lg - 1)));
}

double space_allocator::feasibility_accumulator(size_t level) const {
  if (level >= levels_.size()) return 0.0;
  return static_cast<double>(levels_[level].accumulator);
}

double space_allocator::max_accumulator(size_t level) const {
  if (level >= levels_.size()) return 0.0;
  return static_cast<double>(levels_[level].max_accumulator);
}

uint64_t space_allocator::max_steps_per_child(size_t level) const {
  if (level >= levels_.size()) return 0;
  return levels_[level].max_steps_per_child;
}

uint64_t space_allocator::closed_intervals(size_t level) const {
  if (level >= levels_.size()) return 0;
  return levels_[level].closed;
}

uint64_t space_allocator::max_parents(size_t level) const {
  if (level >= levels_.size()) return 0;
  return levels_[level].max_parents;
}

void space_allocator::save_state(std::ostream& os) const {
  os << eps_exp_ << ' ' << k_ << ' ' << multiplier_ << ' ' << steps_ << ' '
     << levels_.size() << '\n';
  char buf[64];
  for (const auto& st : levels_) {
    std::snprintf(buf, sizeof buf, "%La", st.accumulator);
    std::string acc(buf);
    std::snprintf(buf, sizeof buf, "%La", st.max_accumulator);
    os << st.start << ' ' << st.committed << ' ' << acc << ' ' << buf << ' '
       << st.steps_since_boundary << ' ' << st.max_steps_per_child << ' '
       << st.closed << ' ' << st.parents << ' ' << st.max_parents << '\n';
  }
}

void space_allocator::load_state(std::istream& is) {
  size_t n;
  is >> eps_exp_ >> k_ >> multiplier_ >> steps_ >> n;
  levels_.assign(n, {});
  std::string tok;
  for (auto& st : levels_) {
    is >> st.start >> st.committed;
    is >> tok;
    st.accumulator = std::strtold(tok.c_str(), nullptr);
    is >> tok;
    st.max_accumulator = std::strtold(tok.c_str(), nullptr);
    is >> st.steps_since_boundary >> st.max_steps_per_child >> st.closed >>
        st.parents >> st.max_parents;
  }
}

}  // namespace relquant
