#pragma once

#include "conglab/config.hpp"
#include "conglab/csv.hpp"
#include "conglab/design.hpp"
#include "conglab/errors.hpp"
#include "conglab/estimators.hpp"
#include "conglab/event_log.hpp"
#include "conglab/gradient.hpp"
#include "conglab/mc.hpp"
#include "conglab/model.hpp"
#include "conglab/numeric.hpp"
#include "conglab/rng.hpp"
#include "conglab/scenario.hpp"
#include "conglab/sim.hpp"
#include "conglab/studies.hpp"
#include "conglab/summary.hpp"
#include "conglab/trace.hpp"
