#pragma once

#include "storagedp/backend.hpp"
#include "storagedp/bidding.hpp"
#include "storagedp/dp.hpp"
#include "storagedp/errors.hpp"
#include "storagedp/forecast.hpp"
#include "storagedp/grid.hpp"
#include "storagedp/market_sim.hpp"
#include "storagedp/matrix.hpp"
#include "storagedp/model.hpp"
#include "storagedp/oracle.hpp"
#include "storagedp/synthetic.hpp"
