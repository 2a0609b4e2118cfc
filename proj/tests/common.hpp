#pragma once

#include "cpexc/model.hpp"

namespace cpexc::testing {

// Recurrent reference: Pareto(1, 1.5) jumps at rate 1, b = m1 = 3.
inline ProcessSpec rec_spec() { return ProcessSpec::recurrent(JumpMeasure::pareto_tail(1.0, 1.0, 1.5)); }

// Transient reference: Pareto(1, 2) jumps at rate 1, b = 3, beta = 1.
inline ProcessSpec tra_spec() { return ProcessSpec(3.0, JumpMeasure::pareto_tail(1.0, 1.0, 2.0)); }

}  // namespace cpexc::testing
