#pragma once

#include "mendart/analysis.hpp"
#include "mendart/effective_solver.hpp"
#include "mendart/errors.hpp"
#include "mendart/exact_solver.hpp"
#include "mendart/integrator.hpp"
#include "mendart/model.hpp"
#include "mendart/observables.hpp"
#include "mendart/oracle.hpp"
#include "mendart/report.hpp"
#include "mendart/scenario.hpp"
#include "mendart/states.hpp"
