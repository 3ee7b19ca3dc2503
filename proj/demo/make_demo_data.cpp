// Writes a toy partition-design dataset (shares.csv, outcomes.csv) with a
// strong homogeneous effect, for trying out `ssdiag diagnose`.
//
//   make_demo_data [out_dir] [seed] [groups] [group_size] [beta]

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "ssdiag/dgp.hpp"
#include "ssdiag/io.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : "demo/data";
    try {
        const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 20240601;
        const std::size_t groups = argc > 3 ? std::stoul(argv[3]) : 40;
        const std::size_t group_size = argc > 4 ? std::stoul(argv[4]) : 5;
        const double beta = argc > 5 ? std::stod(argv[5]) : 2.0;

        const ssdiag::Dataset data = ssdiag::partition_dataset(groups, group_size, beta, seed);
        std::filesystem::create_directories(dir);
        std::ofstream(dir / "shares.csv", std::ios::binary) << ssdiag::io::write_shares_csv(data);
        std::ofstream(dir / "outcomes.csv", std::ios::binary) << ssdiag::io::write_outcomes_csv(data);
        std::cout << "wrote " << data.regions() << " regions x " << data.sectors() << " sectors to " << dir.string()
                  << '\n';
    } catch (const ssdiag::Error& e) {
        std::cerr << "make_demo_data: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "make_demo_data: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
