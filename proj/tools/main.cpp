#include <aiga/cli.hpp>

int main(int argc, char** argv) { return aiga::cli_main(argc, argv); }
