#include "estatcom/cli.hpp"

int main(int argc, char** argv) { return estatcom::cli::dispatch(argc, argv); }
