#include "cli.hpp"

int main(int argc, char** argv) { return gradguide::run_cli(argc, argv); }
