#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acqlab/game.hpp"
#include "acqlab/response.hpp"

namespace acqlab {

// Stateful round-by-round world. Draws are taken from per-(round, purpose)
// sub-streams so a trace depends only on (seed, mechanism sequence).
struct Environment {
    GameInstance instance;
    std::uint64_t seed = 0;
    long round = 0;            // rounds executed so far
    double offline_value = 0;  // cached offline optimum, regret baseline
};

// Builds an environment with the offline optimum solved and cached.
Environment make_environment(GameInstance g, std::uint64_t seed);

enum class Phase { Prob, Cost, Commit };
const char* phase_name(Phase p);

struct RoundRecord {
    long round = 0;
    Phase phase = Phase::Commit;
    bool correlated = false;
    long b_recommended = -1;  // -1 for uncorrelated rounds
    long b_played = 0;
    long s_true = 0;
    long s_reported = 0;
    int theta = 0;
    int action = 0;
    std::vector<double> payments;    // [n_agents]
    double exp_utility = 0.0;        // exact U resp. U-circ of the committed mechanism
    double exp_regret = 0.0;         // offline optimum minus exp_utility
};

struct Trace {
    std::vector<RoundRecord> rounds;
    double offline_value = 0.0;
    long ties_observed = 0;  // rounds whose best-response computation hit a tie
};

// A prepared uncorrelated commitment: agents' Lexicographic best responses and
// the exact principal value are computed once and reused every round.
struct UncCommit {
    UncorrelatedMechanism mech;
    std::vector<BestResponse> responses;
    long b_profile = 0;   // played action profile index
    double exp_utility = 0.0;
    bool tie = false;
};

UncCommit prepare_uncorrelated(const Environment& env, UncorrelatedMechanism mech);
RoundRecord step_uncorrelated_prepared(Environment& env, const UncCommit& commit);
RoundRecord step_uncorrelated(Environment& env, const UncorrelatedMechanism& mech);

// A prepared correlated commitment; when strict, rejects mechanisms whose IC
// slack is below -ic_tolerance (throws NonIcMechanismCommitted).
struct CorrCommit {
    CorrelatedMechanism mech;
    double exp_utility = 0.0;
    double min_slack = 0.0;
};

CorrCommit prepare_correlated(const Environment& env, CorrelatedMechanism mech, bool strict,
                              double ic_tolerance = 1e-8);
RoundRecord step_correlated_prepared(Environment& env, const CorrCommit& commit);
RoundRecord step_correlated(Environment& env, const CorrelatedMechanism& mech, bool strict);

struct RegretSummary {
    double total = 0.0;
    double exploration = 0.0;  // Prob + Cost phase rounds
    double commit = 0.0;
    std::vector<double> cumulative;  // running sum per round
};

RegretSummary cumulative_regret(const Trace& trace);

// Columns: round,phase,kind,b_rec,b_played,s_true,s_reported,theta,a,
// pay_1..pay_n,exp_utility,exp_regret,cum_regret. Profiles are comma-joined
// per-agent indices (RFC 4180 quoted); numbers use full precision.
std::string trace_to_csv(const Trace& trace, const GameInstance& g);
void write_trace_csv(const Trace& trace, const GameInstance& g, const std::string& path);

}  // namespace acqlab
