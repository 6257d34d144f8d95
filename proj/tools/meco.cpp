#include <meco/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return meco::cli::run(argc, argv, std::cout, std::cerr);
}
