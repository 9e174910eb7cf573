#include "wls/cli_io.hpp"

int main(int argc, char** argv) { return wls::io::run(argc, argv); }
