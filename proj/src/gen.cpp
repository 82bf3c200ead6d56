#include "acqlab/gen.hpp"

#include <algorithm>
#include <cmath>

#include "acqlab/errors.hpp"
#include "acqlab/rng.hpp"

namespace acqlab {

GameInstance gen_counterexample(double K) {
    if (!(K > 0.0 && K <= 1.0 / 24.0))
        throw InvalidInstance("counterexample requires 0 < K <= 1/24");
    GameInstance g;
    g.n_agents = 2;
    g.k = g.l = g.m = g.d = 2;
    g.budget = 1.0;
    g.prior = {0.5, 0.5};
    // action/signal index 0 is the uninformative option, 1 the informative one
    g.costs = {{0.0, K}, {0.0, 0.0}};
    g.utility = {1.0, 0.0, 0.0, 1.0};  // u(a,theta) = [a == theta]

    const double q = 1.0 / 8.0;
    g.joint.assign(4, std::vector<double>(8, 0.0));
    // agent 1 uninformative: everything uniform regardless of agent 2
    for (long b : {0L, 1L})
        for (int c = 0; c < 8; ++c) g.joint[b][c] = q;

    auto set = [&](long b, int s1, int s2, int theta, double v) {
        g.joint[b][(s1 * 2 + s2) * 2 + theta] = v;
    };
    // b = (informative, uninformative): agent 1's signal matches the state
    // with probability 2/3, agent 2's signal is an independent fair coin
    set(2, 0, 0, 0, 1.0 / 6.0);
    set(2, 0, 0, 1, 1.0 / 12.0);
    set(2, 0, 1, 0, 1.0 / 6.0);
    set(2, 0, 1, 1, 1.0 / 12.0);
    set(2, 1, 0, 0, 1.0 / 12.0);
    set(2, 1, 0, 1, 1.0 / 6.0);
    set(2, 1, 1, 0, 1.0 / 12.0);
    set(2, 1, 1, 1, 1.0 / 6.0);
    // b = (informative, informative): signals perfectly correlated across
    // agents and matching the state with probability 2/3
    set(3, 0, 0, 0, 1.0 / 3.0);
    set(3, 0, 0, 1, 1.0 / 6.0);
    set(3, 0, 1, 0, 0.0);
    set(3, 0, 1, 1, 0.0);
    set(3, 1, 0, 0, 0.0);
    set(3, 1, 0, 1, 0.0);
    set(3, 1, 1, 0, 1.0 / 6.0);
    set(3, 1, 1, 1, 1.0 / 3.0);
    return g;
}

namespace {

std::vector<double> simplex_row(Rng& rng, int len, double floor_w) {
    std::vector<double> w(len);
    double tot = 0.0;
    for (double& v : w) {
        v = floor_w + rng.uniform01();
        tot += v;
    }
    for (double& v : w) v /= tot;
    return w;
}

// 1/1024 grid keeps pairwise differences of sampled values exactly
// representable, so telescoped sums of differences reproduce them bit-exact
double dyadic(Rng& rng, double hi) {
    return std::floor(rng.uniform01() * hi * 1024.0) / 1024.0;
}

// Couples per-agent signal rows through a single shared uniform draw
// (inverse-CDF on each row). Preserves every row as a marginal while making
// the joint draw maximally correlated.
void comonotone(const std::vector<const double*>& rows, int n, int l,
                std::vector<double>& out /* [l^n] */) {
    std::vector<std::vector<double>> cdf(n);
    std::vector<double> cuts{0.0, 1.0};
    for (int i = 0; i < n; ++i) {
        cdf[i].resize(l + 1);
        cdf[i][0] = 0.0;
        for (int s = 0; s < l; ++s) cdf[i][s + 1] = cdf[i][s] + rows[i][s];
        cdf[i][l] = 1.0;
        for (int s = 1; s < l; ++s) cuts.push_back(cdf[i][s]);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<int> digits(n);
    for (size_t j = 0; j + 1 < cuts.size(); ++j) {
        double mass = cuts[j + 1] - cuts[j];
        if (mass <= 0.0) continue;
        double mid = 0.5 * (cuts[j] + cuts[j + 1]);
        for (int i = 0; i < n; ++i) {
            int s = 0;
            while (s + 1 < l && cdf[i][s + 1] <= mid) ++s;
            digits[i] = s;
        }
        out[profile_index(digits, l)] += mass;
    }
}

GameInstance draw_instance(Rng& rng, Kind kind, int n, int k, int l, int m, int d) {
    GameInstance g;
    g.n_agents = n;
    g.k = k;
    g.l = l;
    g.m = m;
    g.d = d;
    g.budget = 1.0;
    g.prior = simplex_row(rng, m, 0.2);

    // psi[i][b_i][theta] -> row over signals, full support
    std::vector<std::vector<std::vector<std::vector<double>>>> psi(n);
    for (int i = 0; i < n; ++i) {
        psi[i].resize(k);
        for (int b = 0; b < k; ++b) {
            psi[i][b].resize(m);
            for (int t = 0; t < m; ++t) psi[i][b][t] = simplex_row(rng, l, 0.05);
        }
    }
    double w_product = (kind == Kind::PIS) ? 1.0 : 0.2 + 0.6 * rng.uniform01();

    long B = g.num_profiles();
    long S = g.num_signal_profiles();
    g.joint.assign(B, std::vector<double>(S * m, 0.0));
    std::vector<double> coupled(S);
    std::vector<const double*> rows(n);
    for (long b = 0; b < B; ++b) {
        std::vector<int> bd = profile_digits(b, n, k);
        for (int t = 0; t < m; ++t) {
            for (int i = 0; i < n; ++i) rows[i] = psi[i][bd[i]][t].data();
            if (w_product < 1.0) comonotone(rows, n, l, coupled);
            for (long s = 0; s < S; ++s) {
                std::vector<int> sd = profile_digits(s, n, l);
                double prod = 1.0;
                for (int i = 0; i < n; ++i) prod *= rows[i][sd[i]];
                double mix = (w_product < 1.0)
                                 ? w_product * prod + (1.0 - w_product) * coupled[s]
                                 : prod;
                g.joint[b][s * m + t] = g.prior[t] * mix;
            }
        }
    }

    g.costs.assign(n, std::vector<double>(k, 0.0));
    for (int i = 0; i < n; ++i)
        for (int b = 1; b < k; ++b) g.costs[i][b] = dyadic(rng, 0.15);

    g.utility.resize(d * m);
    for (double& u : g.utility) u = dyadic(rng, 1.0);
    return g;
}

}  // namespace

GameInstance gen_random(std::uint64_t seed, Kind kind, int n, int k, int l, int m, int d,
                        double min_iota, double min_ell) {
    if (n < 1 || k < 1 || l < 1 || m < 1 || d < 1)
        throw InvalidInstance("gen_random requires positive dimensions");
    Rng rng(mix_u64(seed, 0x67656e72616e64ull));
    for (int attempt = 0; attempt < 10000; ++attempt) {
        GameInstance g = draw_instance(rng, kind, n, k, l, m, d);
        InstanceConstants c = constants(g);
        if (c.iota >= min_iota && c.ell >= min_ell) return g;
    }
    throw GenerationTimeout("no instance met iota/ell floors after 10^4 draws");
}

}  // namespace acqlab
