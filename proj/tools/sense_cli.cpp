#include "commands.hpp"

int main(int argc, char** argv) { return sense::cli::run(argc, argv); }
