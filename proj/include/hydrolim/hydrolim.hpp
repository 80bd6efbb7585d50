#pragma once

#include "hydrolim/assumptions.hpp"
#include "hydrolim/diagnostics.hpp"
#include "hydrolim/errors.hpp"
#include "hydrolim/grid.hpp"
#include "hydrolim/harness.hpp"
#include "hydrolim/kinetic.hpp"
#include "hydrolim/mobility.hpp"
#include "hydrolim/potentials.hpp"
#include "hydrolim/rng.hpp"
#include "hydrolim/smoluchowski.hpp"
