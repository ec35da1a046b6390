// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace charnmt {

// Runs one CLI invocation.  `args` are the arguments after the program
// name, in natural order; `in`/`out`/`err` substitute for the standard
// streams so tests can drive every subcommand in-process.
//
// Exit codes: 0 success, 1 check failure (gradcheck), 2 usage, config,
// or data error, 3 numeric failure.
int run_cli(std::vector<std::string> args, std::istream& in,
            std::ostream& out, std::ostream& err);

}  // namespace charnmt
