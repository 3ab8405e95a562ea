// Copyright 2026 The d1ht Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace d1ht::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAbort = 3;

/// Entry point for the `d1ht` tool. Subcommands: model, sim, wire, summarize.
/// Returns 0 on success, 2 on any configuration or input error and 3 when a
/// simulation aborts.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Comma-separated values and ranges. `a..b` expands to a, 10a, 100a, ... up
/// to b; `a..b:k` places k log-spaced points per decade. Throws
/// std::invalid_argument on malformed or empty input.
std::vector<double> parse_grid(const std::string& spec);

/// Comma-separated seeds; `a..b` is the inclusive integer range.
std::vector<std::uint64_t> parse_seeds(const std::string& spec);

/// Groups rows by every column left of `seed` and reports the mean of every
/// column right of it, with a 95% Student-t interval when a group has more
/// than one row. Throws std::invalid_argument on malformed CSV.
std::string summarize(std::istream& csv);

}  // namespace d1ht::cli
