#include "resmin/cli.hpp"

int main(int argc, char** argv) { return resmin::cli_main(argc, argv); }
