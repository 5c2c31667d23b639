#pragma once

namespace pgd::cli {

/// Entry point for the `pgd` binary. Exit codes: 0 success, 2 usage or
/// configuration error, 3 runtime failure (including aborted runs).
int run(int argc, const char* const* argv);

}  // namespace pgd::cli
