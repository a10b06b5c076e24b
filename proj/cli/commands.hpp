#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tailkde::cli {

//! Exit codes: success, data error, convergence or failed check, configuration error.
enum ExitCode : int
{
  kSuccess = 0,
  kDataError = 2,
  kConvergence = 3,
  kConfigError = 4
};

//! Runs one command line (without the program name). JSON and CSV documents
//! go to `out` unless an output path is given; diagnostics go to `err`.
int
run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tailkde::cli
