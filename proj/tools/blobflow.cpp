// Command line driver. Subcommands are filled in as the library grows;
// this stub only wires up the build.
#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::fprintf(stderr, "blobflow: not yet implemented\n");
    return 2;
}
