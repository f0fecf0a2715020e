#include "pcdm/pipeline/cli.hpp"

int main(int argc, char** argv) { return pcdm::cli_main(argc, argv); }
