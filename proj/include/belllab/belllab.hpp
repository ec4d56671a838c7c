#pragma once

// Umbrella header: the whole library.

#include "belllab/ch.hpp"
#include "belllab/config.hpp"
#include "belllab/driver.hpp"
#include "belllab/errors.hpp"
#include "belllab/estimators.hpp"
#include "belllab/feasibility.hpp"
#include "belllab/frequentism.hpp"
#include "belllab/interpretation.hpp"
#include "belllab/io.hpp"
#include "belllab/models.hpp"
#include "belllab/report.hpp"
#include "belllab/rng.hpp"
#include "belllab/simplex.hpp"
#include "belllab/types.hpp"
#include "belllab/version.hpp"
