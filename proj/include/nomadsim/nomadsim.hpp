#pragma once

// Umbrella header: the whole library in one include.

#include "nomadsim/bytes.hpp"
#include "nomadsim/checkers.hpp"
#include "nomadsim/config.hpp"
#include "nomadsim/control_plane.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/geometry.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/kernel.hpp"
#include "nomadsim/link.hpp"
#include "nomadsim/metrics.hpp"
#include "nomadsim/mobility.hpp"
#include "nomadsim/peer.hpp"
#include "nomadsim/rng.hpp"
#include "nomadsim/scenario.hpp"
#include "nomadsim/simulation.hpp"
#include "nomadsim/siphash.hpp"
#include "nomadsim/spectrum.hpp"
#include "nomadsim/time.hpp"
#include "nomadsim/topology.hpp"
#include "nomadsim/trace.hpp"
#include "nomadsim/transport.hpp"
#include "nomadsim/user_plane.hpp"
