#include "cli.hpp"

int main(int argc, char** argv) { return walnet::cli::dispatch(argc, argv); }
