#pragma once

namespace capepde {

/// Command-line front end. Exit codes: 0 ok, 2 config error, 3 data error,
/// 4 numeric divergence, 1 anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace capepde
