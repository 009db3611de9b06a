#pragma once

#include "subgeo/analysis.hpp"
#include "subgeo/config.hpp"
#include "subgeo/distance.hpp"
#include "subgeo/drift.hpp"
#include "subgeo/lyapunov.hpp"
#include "subgeo/model.hpp"
#include "subgeo/quadrature.hpp"
#include "subgeo/rate.hpp"
#include "subgeo/rng.hpp"
#include "subgeo/simulate.hpp"
#include "subgeo/subordinate.hpp"
