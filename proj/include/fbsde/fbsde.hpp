#pragma once

#include "fbsde/analytic.hpp"
#include "fbsde/cascade.hpp"
#include "fbsde/cascade_build.hpp"
#include "fbsde/config.hpp"
#include "fbsde/contagion.hpp"
#include "fbsde/error.hpp"
#include "fbsde/export.hpp"
#include "fbsde/lattice.hpp"
#include "fbsde/meanfield.hpp"
#include "fbsde/run.hpp"
#include "fbsde/simulator.hpp"
#include "fbsde/system.hpp"
