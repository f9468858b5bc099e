#pragma once

#include "snipe/baselines.hpp"
#include "snipe/core.hpp"
#include "snipe/estimator.hpp"
#include "snipe/harness.hpp"
#include "snipe/linalg.hpp"
#include "snipe/model.hpp"
