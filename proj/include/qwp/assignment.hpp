#pragma once

#include <vector>

#include "qwp/types.hpp"

namespace qwp {

/// Largest square problem accepted by solve_assignment.
inline constexpr Index kMaxAssignmentSize = 5000;

/// Minimum-cost perfect matching on a dense square cost matrix. An
/// epsilon-scaling auction supplies near-optimal column prices; shortest
/// augmenting paths (Dijkstra on reduced costs) then finish the matching
/// exactly. Returns the column assigned to each row.
std::vector<Index> solve_assignment(const Matrix& cost);

/// sum_i cost(i, col_for_row[i]).
double assignment_cost(const Matrix& cost, const std::vector<Index>& col_for_row);

}  // namespace qwp
