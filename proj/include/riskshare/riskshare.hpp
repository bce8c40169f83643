#pragma once

#include "riskshare/compensators.hpp"
#include "riskshare/controls.hpp"
#include "riskshare/error.hpp"
#include "riskshare/fitting.hpp"
#include "riskshare/kde.hpp"
#include "riskshare/measure.hpp"
#include "riskshare/moments.hpp"
#include "riskshare/pricing.hpp"
#include "riskshare/quadrature.hpp"
#include "riskshare/simulate.hpp"
#include "riskshare/special_functions.hpp"
#include "riskshare/verify.hpp"
