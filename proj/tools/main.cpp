#include "optopulse_cli/app.hpp"

int main(int argc, char** argv) { return optopulse::cli::main_entry(argc, argv); }
