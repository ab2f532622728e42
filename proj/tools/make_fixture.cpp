#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cxrkit/data/synthetic.hpp"

// Writes the bundled synthetic dataset so the pipeline can run without the
// real 42 GB corpus: NIH-style manifest, split lists, and labeled PNGs.
int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic smoke-test dataset"};
    std::string output = "synthetic_data";
    int n_images = 64;
    std::uint64_t seed = 7;
    app.add_option("--output", output, "target directory (created if missing)");
    app.add_option("--images", n_images, "number of images")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        cxrkit::data::generate_synthetic_fixture(output, n_images, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    std::cout << "wrote " << n_images << " images under " << output << "\n";
    return 0;
}
