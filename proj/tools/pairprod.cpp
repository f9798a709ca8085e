#include "pairprod/cli.hpp"

int main(int argc, char** argv)
{
    return pairprod::cli::main(argc, argv);
}
