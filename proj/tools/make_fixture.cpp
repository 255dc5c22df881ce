// Writes a self-contained offline bundle (synthetic video, script, detection
// table, config, dataset) for trying the CLI without any live service.
#include "fixtures.hpp"

#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: " << argv[0] << " <output-dir>\n";
        return 1;
    }
    dive::testing::write_demo_bundle(argv[1]);
    std::cout << "wrote offline bundle to " << argv[1] << '\n';
    return 0;
}
