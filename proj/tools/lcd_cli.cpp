#include "lcd/cli.hpp"

int main(int argc, char** argv) { return lcd::cli_dispatch(argc, argv); }
