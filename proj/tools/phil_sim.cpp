#include "phil/harness/cli.hpp"

int main(int argc, char** argv) {
    return phil::cli_main(argc, argv);
}
