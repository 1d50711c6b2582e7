#include "neardup/cli.hpp"

int main(int argc, char** argv) {
    return neardup::run_cli(argc, argv);
}
