#pragma once

// Umbrella header for the backward Euler-Maruyama SDDE library.

#include "sdde_bem/assumptions.hpp"
#include "sdde_bem/brownian.hpp"
#include "sdde_bem/builtin_models.hpp"
#include "sdde_bem/constants.hpp"
#include "sdde_bem/errors.hpp"
#include "sdde_bem/experiments.hpp"
#include "sdde_bem/grid.hpp"
#include "sdde_bem/model.hpp"
#include "sdde_bem/parallel.hpp"
#include "sdde_bem/segment_stats.hpp"
#include "sdde_bem/stepper.hpp"
