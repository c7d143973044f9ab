#pragma once

namespace msfcn {

// Full command-line surface: generate | train | eval | predict | inspect.
// Returns the process exit code: 0 success, 2 usage/config/data error,
// 3 numerical failure.
int cli_main(int argc, char** argv);

}  // namespace msfcn
