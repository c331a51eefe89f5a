#pragma once

#include <string>

namespace phaseflip {

/// How a pulse last came to be in its current state. Simulation ground
/// truth for analysis; no verifier ever reads it.
enum class Provenance { honest, substituted, attenuated, measured_resent };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::honest: return "honest";
        case Provenance::substituted: return "substituted";
        case Provenance::attenuated: return "attenuated";
        case Provenance::measured_resent: return "measured-resent";
    }
    return "?";
}

/// One pulse of coherent light in flight. `phase_true` is the total
/// modulation angle phi of |Psi(phi)> = R(phi)|alpha>; rotations compose
/// additively on it. `index` is the original position in Alice's batch and
/// survives all masking, so parties (and eavesdroppers watching time bins)
/// can align batches without extra bookkeeping.
struct CoherentPulse {
    int index = 0;
    double mean_n_true = 0.0;
    double phase_true = 0.0;
    Provenance provenance = Provenance::honest;
};

} // namespace phaseflip
