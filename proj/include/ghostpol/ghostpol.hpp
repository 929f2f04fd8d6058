#pragma once

// Umbrella header.

#include "ghostpol/core.hpp"
#include "ghostpol/polcalc.hpp"
#include "ghostpol/qstate.hpp"
#include "ghostpol/ghost.hpp"
#include "ghostpol/countsim.hpp"
#include "ghostpol/tomo.hpp"
#include "ghostpol/discern.hpp"
#include "ghostpol/optproj.hpp"
#include "ghostpol/pipeline.hpp"
#include "ghostpol/io/config.hpp"
#include "ghostpol/io/csv.hpp"
#include "ghostpol/io/svg.hpp"
#include "ghostpol/cli/commands.hpp"
