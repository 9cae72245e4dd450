#pragma once

#include <filesystem>

#include "dctstab/dct_basis.hpp"

namespace dctstab {

/// Middlebury .flo: "PIEH", int32 width, int32 height, then row-major
/// interleaved float32 (u, v), all little-endian. Components above 1e9 in
/// magnitude mark unknown flow.
FlowField read_flo(const std::filesystem::path& path);

/// Invalid pixels are written as 1e10.
void write_flo(const std::filesystem::path& path, const FlowField& flow);

}  // namespace dctstab
