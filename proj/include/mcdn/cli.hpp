#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mcdn {

/// Exit codes: 0 success, 1 runtime/I-O failure, 2 invalid arguments.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// MCDN_THREADS, default 1.
unsigned thread_budget();

}  // namespace mcdn
