#pragma once

#include "fedfair/config.hpp"
#include "fedfair/datakit.hpp"
#include "fedfair/engine.hpp"
#include "fedfair/error.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/parallel.hpp"
#include "fedfair/results.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/shapley.hpp"
#include "fedfair/strategies.hpp"
