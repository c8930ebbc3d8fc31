#include "dvar/cli.hpp"

int main(int argc, char** argv) {
    return dvar::cli::run(argc, argv);
}
