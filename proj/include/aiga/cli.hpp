#pragma once

namespace aiga {

/// Entry point of the `aiga` command line tool (subcommands `run` and `compare`).
int cli_main(int argc, char** argv);

}  // namespace aiga
