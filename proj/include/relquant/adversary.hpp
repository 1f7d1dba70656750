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

#ifndef RELQUANT_ADVERSARY_HPP_
#define RELQUANT_ADVERSARY_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "relquant/rank_oracle.hpp"
#include "relquant/rational.hpp"

namespace relquant {

/// What the adaptive stream construction learned and measured. The stream has
/// length 2^depth - 1; the designated query is picked by the recursion, one
/// remember-probability estimate per anchor decides between extending with
/// fresh maxima (the algorithm is paying space) and recursing on an
/// order-ambiguous second half (the algorithm is paying error).
struct adversary_transcript {
  uint32_t depth = 0;
  uint32_t trials = 0;
  std::vector<rational> stream;
  rational query;
  size_t query_index = 0;
  uint64_t query_rank = 0;
  std::vector<double> remember_probs;  // one per decision point
  std::vector<uint8_t> ambiguous;      // estimate fell in [0.4, 0.6]
  std::vector<uint8_t> case_one;       // classified as remembering
  std::vector<double> mean_space;      // E[S_t] per prefix length
  double max_mean_space = 0.0;
  double mean_sq_err = 0.0;
};

/// Stores the s smallest keys seen; the foil the lower-bound harness runs
/// against. Ignores its seed.
class keep_smallest {
 public:
  explicit keep_smallest(size_t cap, uint64_t /*seed*/ = 0) : cap_(cap) {}

  void insert(const rational& x) {
    if (kept_.size() < cap_) {
      kept_.insert(std::upper_bound(kept_.begin(), kept_.end(), x), x);
    } else if (!kept_.empty() && x < kept_.back()) {
      kept_.pop_back();
      kept_.insert(std::upper_bound(kept_.begin(), kept_.end(), x), x);
    }
  }

  std::vector<rational> memory_snapshot() const { return kept_; }

  double estimate_rank(const rational& x) const {
    return static_cast<double>(
        std::lower_bound(kept_.begin(), kept_.end(), x) - kept_.begin());
  }

 private:
  size_t cap_;
  std::vector<rational> kept_;  // sorted
};

namespace detail {

inline uint64_t adv_seed(uint64_t seed, uint64_t node, uint64_t trial) {
  std::seed_seq seq{seed, node, trial};
  uint64_t out[1];
  seq.generate(out, out + 1);
  return out[0];
}

template <typename Factory>
double estimate_remember(Factory& factory, const std::vector<rational>& prefix,
                         const rational& e, uint32_t trials, uint64_t seed,
                         uint64_t node) {
  uint32_t hits = 0;
  for (uint32_t t = 0; t < trials; ++t) {
    auto algo = factory(adv_seed(seed, node, t));
    for (const auto& x : prefix) algo.insert(x);
    auto mem = algo.memory_snapshot();
    if (std::binary_search(mem.begin(), mem.end(), e)) ++hits;
  }
  return static_cast<double>(hits) / trials;
}

}  // namespace detail

/// Builds the adaptive stream against `factory` (seed -> algorithm with
/// insert / memory_snapshot / estimate_rank), then measures per-step expected
/// memory size and the squared error of the designated query over fresh
/// seeds. trials below 30 are rejected: the 1/2 remember threshold cannot be
/// classified from noisier estimates.
template <typename Factory>
adversary_transcript build_adversary_stream(uint32_t depth, Factory&& factory,
                                            uint32_t trials, uint64_t seed) {
  if (trials < 30)
    throw std::invalid_argument("need at least 30 trials per decision");
  // past depth ~9 the exact key labels outgrow 64 bits and the label
  // arithmetic throws; reject the clearly hopeless range up front
  if (depth == 0 || depth > 12)
    throw std::invalid_argument("depth must be in [1, 12]");

  adversary_transcript tr;
  tr.depth = depth;
  tr.trials = trials;
  std::mt19937_64 coin_engine(detail::adv_seed(seed, 7001, 0));
  uint64_t node_counter = 0;

  // Recursive construction inside the open key interval (lo, hi). Returns
  // the stream index of the designated query for this subproblem, or npos
  // when the subproblem is empty.
  constexpr size_t npos = static_cast<size_t>(-1);
  auto rec = [&](auto&& self, uint32_t k, rational lo, rational hi) -> size_t {
    if (k == 0) return npos;
    rational e = midpoint(lo, hi);
    size_t e_index = tr.stream.size();
    tr.stream.push_back(e);
    rational half_min = hi;  // smallest key of the first half, if any
    size_t q_first = self(self, k - 1, e, hi);
    for (size_t i = e_index + 1; i < tr.stream.size(); ++i)
      half_min = std::min(half_min, tr.stream[i]);

    uint64_t node = ++node_counter;
    double p = detail::estimate_remember(factory, tr.stream, e, trials, seed,
                                         node);
    tr.remember_probs.push_back(p);
    tr.ambiguous.push_back(p >= 0.4 && p <= 0.6 ? 1 : 0);
    bool remembered = p >= 0.5;
    tr.case_one.push_back(remembered ? 1 : 0);

    if (remembered) {
      // fresh maxima for this subproblem, evenly placed between its largest
      // key so far and hi so labels stay within 64 bits
      rational local_max = e;
      for (size_t i = e_index + 1; i < tr.stream.size(); ++i)
        local_max = std::max(local_max, tr.stream[i]);
      uint64_t extra = (uint64_t{1} << (k - 1)) - 1;
      for (uint64_t j = 1; j <= extra; ++j)
        tr.stream.push_back(affine_between(local_max, hi, j, extra + 1));
      return q_first != npos ? q_first : e_index;
    }
    // order-ambiguous second half: above e (below the first half) or below e
    bool above = (coin_engine() & 1u) != 0;
    size_t q_second = above ? self(self, k - 1, e, half_min)
                            : self(self, k - 1, lo, e);
    return q_second != npos ? q_second : e_index;
  };

  size_t qi = rec(rec, depth, rational(0), rational(uint64_t{1} << 30));
  tr.query_index = qi;
  tr.query = tr.stream[qi];

  rank_oracle<rational> oracle(tr.stream);
  tr.query_rank = oracle.exact_rank(tr.query);

  // measurement pass: per-step expected memory size and query error
  tr.mean_space.assign(tr.stream.size(), 0.0);
  double sq = 0.0;
  for (uint32_t t = 0; t < trials; ++t) {
    auto algo = factory(detail::adv_seed(seed, 7002, t));
    for (size_t i = 0; i < tr.stream.size(); ++i) {
      algo.insert(tr.stream[i]);
      tr.mean_space[i] += static_cast<double>(algo.memory_snapshot().size());
    }
    double err = algo.estimate_rank(tr.query) -
                 static_cast<double>(tr.query_rank);
    sq += err * err;
  }
  for (auto& v : tr.mean_space) v /= trials;
  tr.mean_sq_err = sq / trials;
  tr.max_mean_space = tr.mean_space.empty()
                          ? 0.0
                          : *std::max_element(tr.mean_space.begin(),
                                              tr.mean_space.end());
  return tr;
}

}  // namespace relquant

#endif  // RELQUANT_ADVERSARY_HPP_
