#pragma once

// Bayesian jackknife empirical likelihood for U-statistic parameters under
// unequal-probability survey sampling: design-weighted, auxiliary-constrained
// and calibration-weighted credible intervals, plus the frequentist EL-ratio
// comparators and a coverage simulation harness.

#include "bjel/analyze.hpp"
#include "bjel/design.hpp"
#include "bjel/elcore.hpp"
#include "bjel/errors.hpp"
#include "bjel/math.hpp"
#include "bjel/posterior.hpp"
#include "bjel/simulation.hpp"
#include "bjel/ustat.hpp"
