// Writes the small double cantilever beam used by the acceptance runs, plus
// ready-to-run configurations for both regularizations, into a directory
// (default: configs/).
#include "dcb_case.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : "configs";
    std::filesystem::create_directories(dir);
    const auto mesh = testsupport::notched_dcb(testsupport::mini_dcb_params());
    testsupport::write_msh(mesh, dir / "mini_dcb.msh");
    for (const std::string reg : {"pf", "lf"}) {
        std::ofstream out(dir / ("mini_dcb_" + reg + ".ini"));
        out << testsupport::mini_dcb_config(reg, 1.0, 0.002, 0.2);
    }
    std::cout << "wrote " << (dir / "mini_dcb.msh").string() << " (" << mesh.num_elements() << " elements)\n";
    return 0;
}
