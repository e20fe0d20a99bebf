#include <iostream>

#include "sparse_sr/cli.hpp"

int main(int argc, char** argv)
{
    return sparse_sr::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
