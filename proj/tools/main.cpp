#include "pvx/cli.hpp"

int main(int argc, char** argv) { return pvx::run_cli(argc, argv); }
