#pragma once

#include <string>

#include "polyadapt/fem.hpp"

namespace polyadapt {

// Poisson problem with sharp interior layers along two parabolic arcs.
ProblemSpec problem_example1();

// Poisson problem with an x^(1/2)-type derivative singularity at the origin.
ProblemSpec problem_example2();

// Smooth manufactured solution sin(pi x) sin(pi y).
ProblemSpec problem_sine();

// Lookup by CLI name ("example1", "example2", "sine"). Throws on unknown name.
ProblemSpec problem_by_name(const std::string& name);

}  // namespace polyadapt
