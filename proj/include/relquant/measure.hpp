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

#ifndef RELQUANT_MEASURE_HPP_
#define RELQUANT_MEASURE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "relquant/rank_oracle.hpp"
#include "relquant/rational.hpp"

namespace relquant {

struct query_report {
  uint64_t query_rank = 0;  // requested grid rank
  uint64_t true_rank = 0;   // exact rank of the resolved key
  double mean_rel_err = 0.0;
  double rms_rel_err = 0.0;
  double p90_rel_err = 0.0;
  uint64_t peak_space = 0;  // max stored keys over all seeds
};

struct error_report {
  std::vector<query_report> queries;
  uint64_t peak_space = 0;
  double mean_space = 0.0;
  std::vector<uint64_t> seeds;
};

/// Per-seed raw estimates, for callers that need trial-level statistics.
struct trial_matrix {
  std::vector<rational> keys;              // resolved grid keys
  std::vector<uint64_t> true_ranks;        // exact rank per key
  std::vector<std::vector<double>> est;    // [seed][query]
  std::vector<uint64_t> peaks;             // per-seed peak stored keys
};

inline unsigned resolve_threads(unsigned requested) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (requested == 0) return hw;
  return std::min(requested, hw);
}

/// Runs `factory(seed)` sketches over the stream and records estimates for
/// the keys resolved at each requested rank. Trials fan out across threads;
/// results are keyed by seed order, so the output is deterministic.
template <typename Factory>
trial_matrix run_trials(Factory&& factory, const std::vector<rational>& stream,
                        const std::vector<uint64_t>& ranks,
                        const std::vector<uint64_t>& seeds,
                        unsigned threads = 0) {
  rank_oracle<rational> oracle(stream);
  trial_matrix m;
  for (uint64_t r : ranks) {
    const rational& key = oracle.key_at_rank(r);
    m.keys.push_back(key);
    m.true_ranks.push_back(oracle.exact_rank(key));
  }
  m.est.assign(seeds.size(), {});
  m.peaks.assign(seeds.size(), 0);

  auto worker = [&](size_t begin, size_t end) {
    for (size_t t = begin; t < end; ++t) {
      auto sk = factory(seeds[t]);
      for (const auto& x : stream) sk.insert(x);
      std::vector<double> row;
      row.reserve(m.keys.size());
      for (const auto& key : m.keys) row.push_back(sk.query(key));
      m.est[t] = std::move(row);
      m.peaks[t] = sk.peak_stored();
    }
  };

  unsigned nw = resolve_threads(threads);
  if (nw <= 1 || seeds.size() <= 1) {
    worker(0, seeds.size());
  } else {
    std::vector<std::thread> pool;
    size_t per = (seeds.size() + nw - 1) / nw;
    for (unsigned w = 0; w < nw; ++w) {
      size_t b = w * per, e = std::min(seeds.size(), b + per);
      if (b >= e) break;
      pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return m;
}

/// Relative error of an estimate at a given true rank; rank zero falls back
/// to the absolute error (head queries are answered exactly anyway).
inline double rel_err(double est, uint64_t true_rank) {
  double denom = true_rank == 0 ? 1.0 : static_cast<double>(true_rank);
  return std::abs(est - static_cast<double>(true_rank)) / denom;
}

template <typename Factory>
error_report measure_error(Factory&& factory,
                           const std::vector<rational>& stream,
                           const std::vector<uint64_t>& ranks,
                           const std::vector<uint64_t>& seeds,
                           unsigned threads = 0) {
  trial_matrix m = run_trials(factory, stream, ranks, seeds, threads);
  error_report rep;
  rep.seeds = seeds;
  uint64_t peak = 0;
  double space_sum = 0.0;
  for (uint64_t p : m.peaks) {
    peak = std::max(peak, p);
    space_sum += static_cast<double>(p);
  }
  rep.peak_space = peak;
  rep.mean_space = m.peaks.empty() ? 0.0 : space_sum / m.peaks.size();
  for (size_t q = 0; q < m.keys.size(); ++q) {
    query_report qr;
    qr.query_rank = ranks[q];
    qr.true_rank = m.true_ranks[q];
    qr.peak_space = peak;
    std::vector<double> errs;
    errs.reserve(seeds.size());
    double sum = 0.0, sq = 0.0;
    for (size_t t = 0; t < seeds.size(); ++t) {
      double e = rel_err(m.est[t][q], m.true_ranks[q]);
      errs.push_back(e);
      sum += e;
      sq += e * e;
    }
    if (!errs.empty()) {
      qr.mean_rel_err = sum / errs.size();
      qr.rms_rel_err = std::sqrt(sq / errs.size());
      std::sort(errs.begin(), errs.end());
      size_t idx = errs.size() == 1
                       ? 0
                       : static_cast<size_t>(
                             std::ceil(0.9 * static_cast<double>(errs.size()))) -
                             1;
      qr.p90_rel_err = errs[std::min(idx, errs.size() - 1)];
    }
    rep.queries.push_back(qr);
  }
  return rep;
}

/// Log-spaced rank grid: powers of two up to n-1, then n-1 itself.
inline std::vector<uint64_t> log_rank_grid(uint64_t n) {
  std::vector<uint64_t> ranks;
  for (uint64_t r = 1; r < n; r *= 2) ranks.push_back(r);
  if (n >= 2 && (ranks.empty() || ranks.back() != n - 1))
    ranks.push_back(n - 1);
  return ranks;
}

}  // namespace relquant

#endif  // RELQUANT_MEASURE_HPP_
