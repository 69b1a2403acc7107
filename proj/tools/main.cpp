#include "kronprec/cli.hpp"

int main(int argc, char** argv) { return kronprec::cli::dispatch(argc, argv); }
