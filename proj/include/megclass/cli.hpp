#pragma once

namespace megclass {

// Exit codes: 0 ok, 1 other failure, 2 config error, 3 missing or stale
// prerequisite, 4 numerical failure.
int cli_main(int argc, char** argv);

}  // namespace megclass
