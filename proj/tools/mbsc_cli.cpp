#include "mbsc/cli.hpp"

int main(int argc, char** argv) { return mbsc::cli_main(argc, argv); }
