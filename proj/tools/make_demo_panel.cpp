// Writes the synthetic demo panel: 45 countries x 1988-2003, outcome
// y = alpha_i + 2 * log_oil_wealth with no noise. All values are multiples of
// 1/8 so the within estimator recovers the slope exactly.
#include "nafe/rng.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    const std::string path = argc > 1 ? argv[1] : "data/demo_panel.csv";
    std::ofstream out(path);
    if (!out) {
        std::cerr << "cannot open " << path << "\n";
        return 2;
    }
    const nafe::rng::CounterRng draws(20031988, nafe::rng::Stream::Regressor);
    out << "unit,time,y,log_oil_wealth\n";
    for (int i = 0; i < 45; ++i) {
        char unit[8];
        std::snprintf(unit, sizeof unit, "C%02d", i + 1);
        const double alpha = static_cast<double>(draws.below(64, static_cast<std::uint64_t>(i), 0)) / 8.0 - 4.0;
        for (int year = 1988; year <= 2003; ++year) {
            const auto t = static_cast<std::uint32_t>(year - 1987);
            const double x = static_cast<double>(draws.below(96, static_cast<std::uint64_t>(i), t)) / 8.0;
            out << unit << ',' << year << ',' << alpha + 2.0 * x << ',' << x << '\n';
        }
    }
    std::cout << "wrote " << path << "\n";
    return 0;
}
