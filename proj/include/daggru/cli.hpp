// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace daggru {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "DAGGRU_OUT_DIR";

/// Entry point behind the `daggru` binary. `args` excludes the program name.
/// Subcommands: gen-synthetic, train, evaluate, seed-study, split-study,
/// bootstrap, report. Returns 0 on success, 2 on usage errors and 1 on
/// runtime failures; failures write one "error: <kind>: <message>" line to
/// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace daggru
