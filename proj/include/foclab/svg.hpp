#pragma once

#include <filesystem>

#include "foclab/trace.hpp"

namespace foclab {

// Two stacked panels: reference vs measured speed, and raw vs adjusted
// quadrature current. Series are downsampled to at most 2000 points with a
// fixed stride, so the output is byte-identical for identical traces.
// Throws DomainError on an empty trace before touching the file.
void plot_trace(const SimTrace& trace, const std::filesystem::path& out_path);

}  // namespace foclab
