#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swps {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitConfig = 2, kExitRuntime = 3 };

/// swps-lru <command> --config <path> [--threads N] [--seed S] [key.path=value ...]
///
/// Commands: synth, preprocess, featurize, train, eval, ensemble, sweep.
/// Primary outputs go under the configured output directory; progress goes
/// to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swps
