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

#ifndef RELQUANT_ERRORS_HPP_
#define RELQUANT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace relquant {

/// Thrown when a compactor's progress measure would reach 1. The space
/// sequence handed to the compactor violated its feasibility contract; the
/// caller owns that contract, so this is always a caller bug and must be loud.
class capacity_exhausted : public std::runtime_error {
 public:
  explicit capacity_exhausted(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace relquant

#endif  // RELQUANT_ERRORS_HPP_
