#include "marginfilter/cli.hpp"

int main(int argc, char** argv) { return marginfilter::cli_dispatch(argc, argv); }
