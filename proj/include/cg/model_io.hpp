#pragma once

#include <string>

#include "cg/variants.hpp"

namespace cg {

/// Binary model file (.cgrd): magic "CGRD", u32 version, u32 variant kind,
/// u32 Ex, Ey, Z, Wx, Wy, Sx, Sy, then pi row-major (cell-major,
/// feature-minor) as little-endian float64, then the prior log
/// probabilities. Version is currently 1.
void save_model(const CgModel& model, const std::string& path);
CgModel load_model(const std::string& path);

/// Plain-text header twin of the binary file, for diffing runs.
void write_model_text_header(const CgModel& model, const std::string& path);

}  // namespace cg
