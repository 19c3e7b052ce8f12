#include "cli_app.hpp"

int main(int argc, char** argv) { return mm1re::cli::main_entry(argc, argv); }
