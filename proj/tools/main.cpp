#include "mminfer/cli.hpp"

int main(int argc, char** argv) {
    return mminfer::cli_dispatch(argc, argv);
}
