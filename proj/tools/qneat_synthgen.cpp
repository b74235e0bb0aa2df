// Generates a synthetic flow-feature CSV in the shape the trainer consumes:
// nine attack categories plus normal traffic. Each feature gets a random
// polarity; attack rows sit high on positive-polarity bytes and low on
// negative ones, normal rows the reverse. Class means therefore straddle
// the origin along learnable directions, as heterogeneous real header bytes
// do, while every value stays a byte in 0..255.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qneat/dataset.hpp"
#include "qneat/math.hpp"

namespace {

const std::vector<std::string> kAttackCategories = {
    "fuzzers", "analysis", "backdoors", "exploits", "reconnaissance",
    "dos",     "generic",  "shellcode", "worms"};

int clip_byte(double v) {
    return std::clamp(static_cast<int>(std::lround(v)), 0, 255);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic flow-feature CSV generator"};
    std::string out = "synthetic_flows.csv";
    int attacks_per_category = 60;
    int normals = -1;  // default 9x attacks
    int features = static_cast<int>(qneat::kFlowFeatureCount);
    std::uint64_t seed = 1;
    app.add_option("--out", out, "output CSV path");
    app.add_option("--attacks", attacks_per_category, "rows per attack category");
    app.add_option("--normals", normals, "normal rows (default 9x attacks)");
    app.add_option("--features", features, "feature count")->check(CLI::Range(1, 4096));
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    if (normals < 0) normals = static_cast<int>(kAttackCategories.size()) * attacks_per_category;

    qneat::Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 20.0);
    std::vector<double> polarity(static_cast<std::size_t>(features));
    for (auto& p : polarity) p = (rng() & 1) ? 1.0 : -1.0;

    std::ofstream f(out);
    if (!f) {
        std::cerr << "error: cannot write " << out << '\n';
        return 1;
    }
    for (int i = 0; i < features; ++i) f << 'f' << i << ',';
    f << "category\n";

    auto emit_row = [&](double side, const std::string& category) {
        for (int j = 0; j < features; ++j) {
            const double mean = 125.0 + side * polarity[static_cast<std::size_t>(j)] * 95.0;
            f << clip_byte(mean + noise(rng)) << ',';
        }
        f << category << '\n';
    };

    for (int i = 0; i < normals; ++i) emit_row(-1.0, "normal");
    for (std::size_t c = 0; c < kAttackCategories.size(); ++c)
        for (int i = 0; i < attacks_per_category; ++i)
            emit_row(1.0 + 0.02 * static_cast<double>(c), kAttackCategories[c]);

    std::cout << "wrote " << out << ": " << normals << " normal + "
              << kAttackCategories.size() * static_cast<std::size_t>(attacks_per_category)
              << " attack rows, " << features << " features\n";
    return 0;
}
