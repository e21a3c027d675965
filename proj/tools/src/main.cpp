#include "mfspc_cli/commands.hpp"

int main(int argc, char** argv) { return mfspc::cli::run(argc, argv); }
