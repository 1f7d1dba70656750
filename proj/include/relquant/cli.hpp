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

#ifndef RELQUANT_CLI_HPP_
#define RELQUANT_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace relquant {

// exit codes shared by every subcommand
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_capacity = 3;
inline constexpr int exit_io = 4;

/// Runs the command line given argv-style arguments (without the program
/// name). Output destined for stdout goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

/// "1/64" or "1/2^6" -> 6. Throws std::invalid_argument otherwise.
uint32_t parse_inverse_pow2(const std::string& s);

}  // namespace relquant

#endif  // RELQUANT_CLI_HPP_
