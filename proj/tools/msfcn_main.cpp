#include "msfcn/cli.hpp"

int main(int argc, char** argv) { return msfcn::cli_main(argc, argv); }
