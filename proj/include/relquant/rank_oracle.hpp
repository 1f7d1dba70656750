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

#ifndef RELQUANT_RANK_ORACLE_HPP_
#define RELQUANT_RANK_ORACLE_HPP_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace relquant {

/// Exact ground truth: the whole stream, sorted. rank(x) counts the keys
/// strictly below x.
template <typename T, typename Compare = std::less<T>>
class rank_oracle {
 public:
  explicit rank_oracle(std::vector<T> stream, Compare comp = Compare())
      : sorted_(std::move(stream)), comp_(comp) {
    std::sort(sorted_.begin(), sorted_.end(), comp_);
  }

  uint64_t exact_rank(const T& x) const {
    return static_cast<uint64_t>(
        std::lower_bound(sorted_.begin(), sorted_.end(), x, comp_) -
        sorted_.begin());
  }

  /// The (r+1)-th smallest stream key. Its exact rank can be below r when
  /// the stream holds duplicates.
  const T& key_at_rank(uint64_t r) const {
    if (r >= sorted_.size()) throw std::out_of_range("rank beyond stream");
    return sorted_[static_cast<size_t>(r)];
  }

  uint64_t size() const { return sorted_.size(); }
  const std::vector<T>& sorted() const { return sorted_; }

 private:
  std::vector<T> sorted_;
  Compare comp_;
};

}  // namespace relquant

#endif  // RELQUANT_RANK_ORACLE_HPP_
