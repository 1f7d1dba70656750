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

#ifndef RELQUANT_GENERATORS_HPP_
#define RELQUANT_GENERATORS_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relquant/rational.hpp"

namespace relquant {

struct tree_instance_options {
  uint64_t batch = 0;   // 0: ceil(n^0.1)
  uint64_t pauses = 100;
};

std::vector<rational> gen_uniform(uint64_t n, uint64_t seed);
std::vector<rational> gen_sorted(uint64_t n);
std::vector<rational> gen_reverse(uint64_t n);
std::vector<rational> gen_permutation(uint64_t n, uint64_t seed);

/// Nested bursts: a batch of small keys pauses periodically, and each pause
/// runs the same pattern one key-band higher, recursing for about
/// 0.1*log2(n) levels. Exercises rapid growth and reset churn across scales.
std::vector<rational> gen_tree_instance(uint64_t n, uint64_t seed,
                                        tree_instance_options opt = {});

/// kind: uniform | sorted | reverse | permutation | tree_instance
std::vector<rational> gen_stream(const std::string& kind, uint64_t n,
                                 uint64_t seed, tree_instance_options opt = {});

/// Newline-delimited keys. Plain decimal lines when every key is an integer,
/// p/q lines otherwise; the two forms never mix within one file.
void write_stream(std::ostream& os, const std::vector<rational>& keys);

/// Rejects files mixing plain-integer and p/q lines.
std::vector<rational> read_stream(std::istream& is);

}  // namespace relquant

#endif  // RELQUANT_GENERATORS_HPP_
