#pragma once

#include "eigenprism/core_model.hpp"
#include "eigenprism/distributions.hpp"
#include "eigenprism/error.hpp"
#include "eigenprism/estimators.hpp"
#include "eigenprism/mp_tools.hpp"
#include "eigenprism/sim_harness.hpp"
#include "eigenprism/weight_solver.hpp"
