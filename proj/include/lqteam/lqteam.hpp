#pragma once

#include "lqteam/config_io.hpp"
#include "lqteam/export.hpp"
#include "lqteam/filters.hpp"
#include "lqteam/fixed_point.hpp"
#include "lqteam/grid.hpp"
#include "lqteam/hamiltonian.hpp"
#include "lqteam/integrators.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/model.hpp"
#include "lqteam/report.hpp"
#include "lqteam/riccati.hpp"
#include "lqteam/rng.hpp"
#include "lqteam/schedule.hpp"
#include "lqteam/sde.hpp"
#include "lqteam/solvers.hpp"
#include "lqteam/strategy.hpp"
#include "lqteam/trajectory.hpp"
#include "lqteam/verification.hpp"
#include "lqteam/version.hpp"
