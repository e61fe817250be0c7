#include "cli_app.hpp"

int main(int argc, char** argv) { return aecomm::cli::run_cli(argc, argv); }
