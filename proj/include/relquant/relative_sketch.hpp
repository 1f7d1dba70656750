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

#ifndef RELQUANT_RELATIVE_SKETCH_HPP_
#define RELQUANT_RELATIVE_SKETCH_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relquant/params.hpp"
#include "relquant/scale_sketch.hpp"
#include "relquant/space_allocator.hpp"

namespace relquant {

struct sketch_options {
  bool instrument = false;
  bool trace = false;
};

struct trace_row {
  uint64_t step;
  uint32_t level;
  uint64_t s_hat;
  uint64_t phi_level;
  uint64_t phi_child;
  double accumulator;
};

enum class sketch_event_kind : uint8_t { flush, reset, deliver, resize };

struct sketch_event {
  sketch_event_kind kind;
  uint32_t scale;
};

/// Streaming rank sketch with a multiplicative error guarantee.
///
/// Keys are spread across per-scale sketches with disjoint key ranges; scale
/// i holds the keys of rank roughly 2^i/eps and answers with absolute error
/// about 2^i, which compounds to a relative guarantee. Incoming keys are
/// staged per scale and flushed through the scale's sampler in batches of
/// 1/eps; when a scale outgrows its weight cap its largest keys migrate one
/// scale up, after that scale's compaction schedules are reset. Space per
/// scale follows the allocator's potential-based targets and is re-reconciled
/// after every step.
///
/// Queries sum each scale's weight below the query key plus the staged keys
/// below it (staged keys are genuine stream elements and count with weight
/// one). Identical (stream, parameters, seed) give bit-identical estimates
/// and traces.
template <typename T, typename Compare = std::less<T>>
class relative_sketch {
 public:
  relative_sketch(const sketch_params& sp, uint64_t seed,
                  sketch_options opt = {}, Compare comp = Compare())
      : sp_(sp),
        seed_(seed),
        opt_(opt),
        comp_(comp),
        alloc_(sp.eps_exp, sp.k, sp.space_multiplier) {
    uint64_t tgt = alloc_.space_target(0);
    scales_.push_back(std::make_unique<scale_sketch<T, Compare>>(
        0, sp_, seed_, tgt, opt_.instrument, comp_));
    staging_.emplace_back();
    space_.push_back(tgt);
  }

  relative_sketch(uint32_t eps_exp, uint64_t seed, sketch_options opt = {})
      : relative_sketch(sketch_params::make(eps_exp), seed, opt) {}

  const sketch_params& params() const { return sp_; }
  uint64_t seed() const { return seed_; }
  uint64_t n_seen() const { return n_seen_; }
  size_t scale_count() const { return scales_.size(); }
  const scale_sketch<T, Compare>& scale(size_t i) const { return *scales_[i]; }
  uint64_t scale_space(size_t i) const { return space_.at(i); }
  const space_allocator& allocator() const { return alloc_; }
  const std::vector<T>& staged(size_t i) const { return staging_.at(i); }

  void insert(const T& x) {
    size_t i = route(x);
    staging_[i].push_back(x);
    ++n_seen_;
    if (staging_[i].size() >= sp_.staging_cap) flush_scale(i);
    if (opt_.instrument) check_invariants();
  }

  /// Total estimated weight below x: per-scale estimates plus staged keys.
  double query(const T& x) const {
    double r = 0.0;
    for (const auto& s : scales_) r += s->rank_estimate(x);
    for (const auto& st : staging_)
      for (const T& v : st)
        if (comp_(v, x)) r += 1.0;
    return r;
  }

  std::vector<double> query_grid(const std::vector<T>& xs) const {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const T& x : xs) out.push_back(query(x));
    return out;
  }

  /// Every stream key currently held anywhere (levels, buffers, staging),
  /// sorted. This is the comparison-model memory set.
  std::vector<T> memory_snapshot() const {
    std::vector<T> all;
    for (const auto& s : scales_)
      s->hierarchy().for_each_stored([&](const T& v) { all.push_back(v); });
    for (const auto& st : staging_)
      all.insert(all.end(), st.begin(), st.end());
    std::sort(all.begin(), all.end(), comp_);
    return all;
  }

  uint64_t stored_count() const {
    uint64_t n = 0;
    for (const auto& s : scales_) n += s->stored_count();
    for (const auto& st : staging_) n += st.size();
    return n;
  }

  uint64_t peak_stored() const { return peak_stored_; }

  const std::vector<trace_row>& trace() const {
    if (!opt_.trace) throw std::logic_error("tracing is disabled");
    return trace_;
  }

  void write_trace_csv(std::ostream& os) const {
    os << "step,level,s_hat,phi_level,phi_child,accumulator\n";
    for (const auto& r : trace()) {
      os << r.step << ',' << r.level << ',' << r.s_hat << ',' << r.phi_level
         << ',' << r.phi_child << ',';
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", r.accumulator);
      os << buf << '\n';
    }
  }

  const std::vector<sketch_event>& events() const {
    if (!opt_.instrument) throw std::logic_error("instrumentation is disabled");
    return events_;
  }

  /// Exact weight bookkeeping identity across every scale; zero when sound.
  /// Requires instrumented construction.
  long long conservation_gap() const {
    long long g = 0;
    for (const auto& s : scales_) g += s->hierarchy().conservation_gap();
    return g;
  }

  void check_invariants() const {
    for (size_t i = 0; i + 1 < scales_.size(); ++i) {
      auto hi = scales_[i]->max_stored();
      auto lo = scales_[i + 1]->min_stored();
      if (hi && lo && comp_(*lo, *hi))
        throw std::logic_error("scale ranges overlap");
    }
    for (const auto& s : scales_) {
      if (s->over_cap()) throw std::logic_error("scale exceeds weight cap");
      if (s->ever_crossed_r() && s->total_weight_units() < s->r_units())
        throw std::logic_error("scale weight fell below R");
    }
  }

  template <typename KeyWriter>
  void save_snapshot(std::ostream& os, KeyWriter&& wk) const {
    os << "relquant-snapshot 1\n";
    os << sp_.eps_exp << ' ' << (sp_.high_prob ? 1 : 0) << ' ' << sp_.delta_log
       << ' ' << seed_ << '\n';
    os << n_seen_ << ' ' << peak_stored_ << ' ' << scales_.size() << '\n';
    for (size_t i = 0; i < scales_.size(); ++i) {
      os << space_[i] << '\n';
      scales_[i]->save_state(os, wk);
      os << staging_[i].size();
      for (const T& v : staging_[i]) {
        os << ' ';
        wk(os, v);
      }
      os << '\n';
    }
    alloc_.save_state(os);
  }

  template <typename KeyReader>
  static relative_sketch load_snapshot(std::istream& is, KeyReader&& rk,
                                       sketch_options opt = {}) {
    std::string magic;
    int version;
    is >> magic >> version;
    if (magic != "relquant-snapshot" || version != 1)
      throw std::runtime_error("unrecognized snapshot header");
    uint32_t eps_exp, delta_log;
    int hp;
    uint64_t seed;
    is >> eps_exp >> hp >> delta_log >> seed;
    sketch_params sp = hp ? sketch_params::make(eps_exp, true, delta_log)
                          : sketch_params::make(eps_exp);
    relative_sketch sk(sp, seed, opt);
    size_t nscales;
    is >> sk.n_seen_ >> sk.peak_stored_ >> nscales;
    sk.scales_.clear();
    sk.staging_.clear();
    sk.space_.clear();
    for (size_t i = 0; i < nscales; ++i) {
      uint64_t space;
      is >> space;
      auto sc = std::make_unique<scale_sketch<T, Compare>>(
          static_cast<uint32_t>(i), sp, seed, space, opt.instrument);
      sc->load_state(is, rk);
      sk.scales_.push_back(std::move(sc));
      size_t nst;
      is >> nst;
      std::vector<T> st;
      st.reserve(nst);
      for (size_t j = 0; j < nst; ++j) st.push_back(rk(is));
      sk.staging_.push_back(std::move(st));
      sk.space_.push_back(space);
    }
    sk.alloc_.load_state(is);
    return sk;
  }

 private:
  /// The first scale whose successor is empty or holds only keys above x.
  /// Stored minima increase with the scale index and empty scales form a
  /// suffix, so this is a binary search over the minima.
  size_t route(const T& x) const {
    size_t lo = 1, hi = scales_.size();
    while (lo < hi) {
      size_t mid = lo + (hi - lo) / 2;
      auto m = scales_[mid]->min_stored();
      if (m && !comp_(x, *m))  // min <= x: keep scanning upward
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo - 1;
  }

  void flush_scale(size_t i) {
    flush_staged(i);
    cascade(i);
    reconcile();
  }

  void flush_staged(size_t i) {
    if (staging_[i].empty()) return;
    std::vector<T> batch = std::exchange(staging_[i], {});
    alloc_.note_step(i, space_[i]);
    scales_[i]->flush_raw_batch(batch);
    post_step(i);
    if (opt_.instrument)
      events_.push_back({sketch_event_kind::flush, static_cast<uint32_t>(i)});
  }

  void materialize_scale(size_t child) {
    alloc_.on_reset(child);
    uint64_t tgt = alloc_.space_target(child);
    scales_.push_back(std::make_unique<scale_sketch<T, Compare>>(
        static_cast<uint32_t>(child), sp_, seed_, tgt, opt_.instrument, comp_));
    staging_.emplace_back();
    space_.push_back(tgt);
    alloc_.note_step(child, tgt);  // the initial sizing counts as a resize
    post_step(child);
    if (opt_.instrument)
      events_.push_back(
          {sketch_event_kind::reset, static_cast<uint32_t>(child)});
  }

  void cascade(size_t from) {
    for (size_t s = from; s < scales_.size(); ++s) {
      if (!scales_[s]->over_cap()) continue;
      // staged keys belong to this scale's range; fold them in before the
      // drain so none of them can later land above a migrated key
      flush_staged(s);
      size_t child = s + 1;
      if (child == scales_.size()) {
        materialize_scale(child);
      } else {
        alloc_.on_reset(child);
        scales_[child]->reset();
        if (opt_.instrument)
          events_.push_back(
              {sketch_event_kind::reset, static_cast<uint32_t>(child)});
      }
      deliver(child, scales_[s]->drain_overflow());
    }
  }

  void deliver(size_t child, std::vector<std::pair<T, int>> batch) {
    // group by weight exponent, preserving key order within each group
    std::vector<std::pair<int, std::vector<T>>> groups;
    for (auto& [key, e] : batch) {
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](const auto& g) { return g.first == e; });
      if (it == groups.end()) {
        groups.push_back({e, {}});
        it = groups.end() - 1;
      }
      it->second.push_back(std::move(key));
    }
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [e, keys] : groups) {
      size_t off = 0;
      while (off < keys.size()) {
        size_t chunk = std::min<size_t>(space_[child], keys.size() - off);
        std::vector<T> part(keys.begin() + off, keys.begin() + off + chunk);
        off += chunk;
        alloc_.note_step(child, space_[child]);
        scales_[child]->receive_migrated(e, part);
        post_step(child);
        if (opt_.instrument)
          events_.push_back(
              {sketch_event_kind::deliver, static_cast<uint32_t>(child)});
      }
    }
  }

  void reconcile() {
    for (int rounds = 0; rounds < 10000; ++rounds) {
      bool changed = false;
      for (size_t s = 0; s < scales_.size(); ++s) {
        uint64_t tgt = alloc_.space_target(s);
        if (tgt == space_[s]) continue;
        alloc_.note_step(s, tgt);
        scales_[s]->resize(tgt);
        space_[s] = tgt;
        post_step(s);
        if (opt_.instrument)
          events_.push_back(
              {sketch_event_kind::resize, static_cast<uint32_t>(s)});
        // the compaction parity can nudge the weight past the cap
        if (scales_[s]->over_cap()) cascade(s);
        changed = true;
      }
      if (!changed) return;
    }
    throw std::logic_error("space reconciliation did not settle");
  }

  void post_step(size_t level) {
    uint64_t stored = stored_count();
    if (stored > peak_stored_) peak_stored_ = stored;
    if (opt_.trace)
      trace_.push_back({alloc_.steps(), static_cast<uint32_t>(level),
                        alloc_.space_target(level), alloc_.phi_open(level),
                        alloc_.phi_child(level),
                        alloc_.feasibility_accumulator(level)});
  }

  sketch_params sp_;
  uint64_t seed_;
  sketch_options opt_;
  Compare comp_;
  std::vector<std::unique_ptr<scale_sketch<T, Compare>>> scales_;
  std::vector<std::vector<T>> staging_;
  std::vector<uint64_t> space_;
  space_allocator alloc_;
  uint64_t n_seen_ = 0;
  uint64_t peak_stored_ = 0;
  std::vector<trace_row> trace_;
  std::vector<sketch_event> events_;
};

}  // namespace relquant

#endif  // RELQUANT_RELATIVE_SKETCH_HPP_
