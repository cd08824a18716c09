#include "corrdict/cli.hpp"

int main(int argc, char** argv) { return corrdict::cli::run(argc, argv); }
