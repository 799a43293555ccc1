// Regenerates the LDPC code-definition files shipped under data/codes/.
#include <cstdio>
#include <string>
#include <vector>

#include "fourdsim/fec.hpp"

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "data/codes";
    using fourdsim::IraDegreeGroup;
    // 12.5% of information columns at degree 11, the rest at degree 3
    const std::vector<IraDegreeGroup> profile{{18, 11}, {126, 3}};

    auto full = fourdsim::make_qc_ira_code(64800, 51840, 360, profile, 20260823);
    fourdsim::save_code(full, out_dir + "/ira_n64800_r45.txt");
    std::printf("wrote %s/ira_n64800_r45.txt (n=%d k=%d)\n", out_dir.c_str(), full.n(), full.k());

    auto desk = fourdsim::make_qc_ira_code(6480, 5184, 36, profile, 20260823);
    fourdsim::save_code(desk, out_dir + "/ira_n6480_r45.txt");
    std::printf("wrote %s/ira_n6480_r45.txt (n=%d k=%d)\n", out_dir.c_str(), desk.n(), desk.k());
    return 0;
}
