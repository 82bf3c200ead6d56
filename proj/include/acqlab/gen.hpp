#pragma once

#include <cstdint>

#include "acqlab/game.hpp"

namespace acqlab {

// PIS: signals independent across agents given the state (product form).
// General: correlated signal draws whose per-agent marginals still depend only
// on the agent's own action, so the peer-independence check passes.
enum class Kind { PIS, General };

// The two-agent separation instance: binary actions/signals/states, identity
// utility, agent 1 pays K for its informative action. Requires 0 < K <= 1/24.
GameInstance gen_counterexample(double K);

// Seeded random instance with iota (minimum signal probability) and ell
// (minimum posterior separation) floors enforced by rejection sampling.
// Throws GenerationTimeout after 10^4 rejected draws.
GameInstance gen_random(std::uint64_t seed, Kind kind, int n, int k, int l, int m, int d,
                        double min_iota = 0.0, double min_ell = 0.0);

}  // namespace acqlab
