#pragma once

#include "geoflow/antisym.hpp"
#include "geoflow/bvp.hpp"
#include "geoflow/clebsch.hpp"
#include "geoflow/conserved.hpp"
#include "geoflow/direct_flow.hpp"
#include "geoflow/ellipsoid.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/ode.hpp"
#include "geoflow/poisson.hpp"
#include "geoflow/vec.hpp"
