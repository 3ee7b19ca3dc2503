#pragma once

#include "ssdiag/analytics.hpp"
#include "ssdiag/core_data.hpp"
#include "ssdiag/dgp.hpp"
#include "ssdiag/error.hpp"
#include "ssdiag/estimators.hpp"
#include "ssdiag/io.hpp"
#include "ssdiag/matrix.hpp"
#include "ssdiag/parallel.hpp"
#include "ssdiag/rng.hpp"
#include "ssdiag/sim_engines.hpp"
#include "ssdiag/version.hpp"
