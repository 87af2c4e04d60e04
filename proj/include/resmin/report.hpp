#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "resmin/adapt.hpp"

namespace resmin {

/// Convergence table, one row per level. Missing quantities are left blank;
/// floating-point values carry 15 significant digits.
void write_records_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records);

/// Standalone log-log convergence plot (error against dofs^(1/2)) with
/// per-series least-squares rate annotations.
void write_convergence_svg(std::ostream& out, const std::vector<ConvergenceRecord>& records,
                           const std::string& title);

} // namespace resmin
