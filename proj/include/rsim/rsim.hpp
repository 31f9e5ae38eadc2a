// Umbrella header: pulls in every module of the roundabout-safety toolkit.
#pragma once

#include "rsim/common.hpp"
#include "rsim/csv.hpp"
#include "rsim/distributions.hpp"
#include "rsim/gaze.hpp"
#include "rsim/geometry.hpp"
#include "rsim/intent.hpp"
#include "rsim/levels.hpp"
#include "rsim/scenario.hpp"
#include "rsim/ssm.hpp"
#include "rsim/stats.hpp"
#include "rsim/trajectory.hpp"
#include "rsim/warning.hpp"
