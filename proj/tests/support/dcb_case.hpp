#pragma once

#include "meshes.hpp"

#include <string>

namespace testsupport {

/// Notched DCB, 30 x 16 mm, 8 mm slit, 0.8 mm cells (1520 elements).
DcbParams mini_dcb_params();

/// Configuration text for the mini DCB: creep chain with eleven KV units, the
/// (46.667 J/m2, 1.25 mm) fracture pair, pads held in x, bottom pad fixed, top
/// pad opened at `rate` mm/s.
std::string mini_dcb_config(const std::string& regularization, double rate, double dt, double t_end,
                            const std::string& mesh_path = "mini_dcb.msh");

}  // namespace testsupport
