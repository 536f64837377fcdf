#pragma once

#include "resysid/baselines.hpp"
#include "resysid/errors.hpp"
#include "resysid/experiments.hpp"
#include "resysid/linalg.hpp"
#include "resysid/online.hpp"
#include "resysid/parallel.hpp"
#include "resysid/random.hpp"
#include "resysid/re_estimator.hpp"
#include "resysid/residual_grid.hpp"
#include "resysid/signals.hpp"
