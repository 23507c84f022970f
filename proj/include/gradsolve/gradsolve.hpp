#pragma once

#include "gradsolve/csv.hpp"
#include "gradsolve/domain_grid.hpp"
#include "gradsolve/error.hpp"
#include "gradsolve/inner_solver.hpp"
#include "gradsolve/levelset.hpp"
#include "gradsolve/outer_fixedpoint.hpp"
#include "gradsolve/parallel.hpp"
#include "gradsolve/properties.hpp"
#include "gradsolve/pucci.hpp"
#include "gradsolve/radial_oracle.hpp"
