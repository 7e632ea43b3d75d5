#include "acton_cli/cli.hpp"

int main(int argc, char** argv) { return acton::cli::dispatch(argc, argv); }
