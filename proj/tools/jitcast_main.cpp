#include "jitcast/cli.hpp"

int main(int argc, char** argv) { return jitcast::io::run_cli(argc, argv); }
