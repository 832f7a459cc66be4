#pragma once

#include "evmarket/choice.hpp"
#include "evmarket/errors.hpp"
#include "evmarket/investment.hpp"
#include "evmarket/montecarlo.hpp"
#include "evmarket/pricing.hpp"
#include "evmarket/report.hpp"
#include "evmarket/scenario.hpp"
#include "evmarket/version.hpp"
#include "evmarket/welfare.hpp"
