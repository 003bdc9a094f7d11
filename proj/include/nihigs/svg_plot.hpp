#pragma once

#include <string>

#include "nihigs/loop.hpp"

namespace nihigs {

/// Static SVG line chart of all plant state columns and the controller state
/// against the step index. Self-contained polylines, fixed viewport, no
/// external renderer.
std::string trace_to_svg(const ClosedLoopTrace<double>& t,
                         const std::string& title = "State trajectories");

void save_trace_svg(const std::string& path, const ClosedLoopTrace<double>& t,
                    const std::string& title = "State trajectories");

}  // namespace nihigs
