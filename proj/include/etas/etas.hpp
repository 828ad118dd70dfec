#pragma once

#include "etas/catalog.hpp"
#include "etas/changepoint.hpp"
#include "etas/core.hpp"
#include "etas/empirical_bayes.hpp"
#include "etas/error.hpp"
#include "etas/mle.hpp"
#include "etas/nonstationary.hpp"
#include "etas/residual.hpp"
#include "etas/roundtrip.hpp"
#include "etas/scoreboard.hpp"
#include "etas/simulator.hpp"
#include "etas/io/json.hpp"
#include "etas/io/svg.hpp"
