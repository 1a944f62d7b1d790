#include <iostream>

#include "fgd/cli.hpp"

int main(int argc, char** argv)
{
    return fgd::cli::run_cli(argc, argv, std::cout, std::cerr);
}
