#include <iostream>

#include "symml/cli.hpp"

int main(int argc, char** argv)
{
    return symml::cli::dispatch(argc, argv, std::cout, std::cerr);
}
