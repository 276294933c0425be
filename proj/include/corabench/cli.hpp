#pragma once

#include <ostream>

#include "corabench/common.hpp"

namespace corabench {

/// Entry point of the `corabench` tool. Returns the process exit code; errors
/// are reported on `err` as "error [<category>]: <message>".
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

/// Exit code used for an error of the given category (0 is reserved for success).
int exit_code_for(ErrorCategory category);

}  // namespace corabench
