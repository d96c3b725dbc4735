#include "docrl/cli.hpp"

int main(int argc, char** argv) { return docrl::cli::run(argc, argv); }
