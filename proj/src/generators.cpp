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

#include "relquant/generators.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace relquant {

namespace {

uint64_t mixed_seed(uint64_t seed, uint64_t tag) {
  std::seed_seq seq{seed, tag};
  uint64_t out[1];
  seq.generate(out, out + 1);
  return out[0];
}

}  // namespace

std::vector<rational> gen_uniform(uint64_t n, uint64_t seed) {
  std::mt19937_64 eng(mixed_seed(seed, 1));
  std::vector<rational> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i)
    out.emplace_back(static_cast<long long>(eng() >> 24));  // [0, 2^40)
  return out;
}

std::vector<rational> gen_sorted(uint64_t n) {
  std::vector<rational> out;
  out.reserve(n);
  for (uint64_t i = 1; i <= n; ++i)
    out.emplace_back(static_cast<long long>(i));
  return out;
}

std::vector<rational> gen_reverse(uint64_t n) {
  std::vector<rational> out;
  out.reserve(n);
  for (uint64_t i = n; i >= 1; --i)
    out.emplace_back(static_cast<long long>(i));
  return out;
}

std::vector<rational> gen_permutation(uint64_t n, uint64_t seed) {
  std::vector<rational> out = gen_sorted(n);
  std::mt19937_64 eng(mixed_seed(seed, 2));
  std::shuffle(out.begin(), out.end(), eng);
  return out;
}

namespace {

struct tree_builder {
  uint64_t n;
  uint64_t batch;
  uint64_t pauses;
  uint64_t max_depth;
  std::vector<rational> out;
  std::vector<uint64_t> counters;  // next key index per depth band

  rational key_at(uint64_t depth) {
    if (counters.size() <= depth) counters.resize(depth + 1, 0);
    uint64_t j = ++counters[depth];
    long long den = static_cast<long long>(n) + 2;
    // depth + j/(n+2): band (depth, depth+1), increasing within the band
    return rational(static_cast<long long>(depth) * den +
                        static_cast<long long>(j),
                    den);
  }

  uint64_t remaining() const { return n - out.size(); }

  void emit(uint64_t depth, uint64_t count) {
    count = std::min<uint64_t>(count, remaining());
    for (uint64_t i = 0; i < count; ++i) out.push_back(key_at(depth));
  }

  /// One node: a batch at `depth` with `pauses` pause points, each running a
  /// child node one band higher. Past max_depth the node is a plain batch.
  void node(uint64_t depth) {
    if (remaining() == 0) return;
    if (depth > max_depth) {
      emit(depth, batch);
      return;
    }
    // spread the batch across the pause gaps
    uint64_t gaps = pauses + 1;
    for (uint64_t g = 0; g < gaps && remaining() > 0; ++g) {
      uint64_t share = batch / gaps + (g < batch % gaps ? 1 : 0);
      emit(depth, share);
      if (g + 1 < gaps) node(depth + 1);
    }
  }
};

}  // namespace

std::vector<rational> gen_tree_instance(uint64_t n, uint64_t seed,
                                        tree_instance_options opt) {
  (void)seed;  // the construction is deterministic
  if (n == 0) return {};
  tree_builder tb;
  tb.n = n;
  tb.pauses = std::max<uint64_t>(1, opt.pauses);
  tb.batch = opt.batch != 0
                 ? opt.batch
                 : static_cast<uint64_t>(
                       std::ceil(std::pow(static_cast<double>(n), 0.1)));
  tb.batch = std::max<uint64_t>(1, std::min(tb.batch, n));
  tb.max_depth = std::max<uint64_t>(
      1, static_cast<uint64_t>(std::ceil(0.1 * std::log2(double(n) + 1))));
  while (tb.remaining() > 0) tb.node(1);
  return tb.out;
}

std::vector<rational> gen_stream(const std::string& kind, uint64_t n,
                                 uint64_t seed, tree_instance_options opt) {
  if (kind == "uniform") return gen_uniform(n, seed);
  if (kind == "sorted") return gen_sorted(n);
  if (kind == "reverse") return gen_reverse(n);
  if (kind == "permutation") return gen_permutation(n, seed);
  if (kind == "tree_instance") return gen_tree_instance(n, seed, opt);
  throw std::invalid_argument("unknown stream kind: " + kind);
}

void write_stream(std::ostream& os, const std::vector<rational>& keys) {
  bool all_int = true;
  for (const auto& k : keys)
    if (k.den != 1) {
      all_int = false;
      break;
    }
  for (const auto& k : keys) {
    if (all_int)
      os << k.num << '\n';
    else
      os << k.num << '/' << k.den << '\n';
  }
}

rational parse_rational(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty key");
  size_t slash = s.find('/');
  try {
    size_t pos = 0;
    if (slash == std::string::npos) {
      long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing junk");
      return rational(v);
    }
    long long num = std::stoll(s.substr(0, slash), &pos);
    if (pos != slash) throw std::invalid_argument("trailing junk");
    long long den = std::stoll(s.substr(slash + 1), &pos);
    if (pos != s.size() - slash - 1) throw std::invalid_argument("trailing junk");
    return rational(num, den);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("key out of range: " + s);
  }
}

std::vector<rational> read_stream(std::istream& is) {
  std::vector<rational> out;
  std::string line;
  int format = -1;  // 0 plain, 1 p/q
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    int f = line.find('/') == std::string::npos ? 0 : 1;
    if (format == -1) format = f;
    if (f != format)
      throw std::invalid_argument("mixed integer and p/q keys in one stream");
    out.push_back(parse_rational(line));
  }
  return out;
}

}  // namespace relquant
