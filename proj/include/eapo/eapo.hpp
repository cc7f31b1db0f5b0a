#pragma once

#include "eapo/errors.hpp"
#include "eapo/types.hpp"
#include "eapo/penalty.hpp"
#include "eapo/ambiguity.hpp"
#include "eapo/estimation.hpp"
#include "eapo/solver.hpp"
#include "eapo/risk_measures.hpp"
#include "eapo/frontier.hpp"
#include "eapo/backtest.hpp"
#include "eapo/inference.hpp"
#include "eapo/data_io.hpp"
