#pragma once

// Simulator and security-analysis toolkit for quantum key distribution by
// phase flipping of mesoscopic coherent states.

#include "phaseflip/adversary.hpp"
#include "phaseflip/ensemble.hpp"
#include "phaseflip/experiment.hpp"
#include "phaseflip/fock.hpp"
#include "phaseflip/measurement.hpp"
#include "phaseflip/protocol.hpp"
#include "phaseflip/pulse.hpp"
#include "phaseflip/rng.hpp"

namespace phaseflip {
inline constexpr const char* kVersion = "0.1.0";
}
