#pragma once

namespace hipt::service {

// Entry point of the `hipt` tool. Returns the process exit status.
int cli_main(int argc, char** argv);

}  // namespace hipt::service
