#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "acqlab/errors.hpp"
#include "acqlab/indexing.hpp"

namespace oracle {

using acqlab::GameInstance;
using acqlab::LinearProgram;
using acqlab::LpStatus;
using acqlab::Sense;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Jordan with partial pivoting on an a x a system; false when singular
bool solve_dense(std::vector<double>& M, std::vector<double>& r, int a) {
    for (int col = 0; col < a; ++col) {
        int piv = col;
        for (int row = col + 1; row < a; ++row)
            if (std::abs(M[row * a + col]) > std::abs(M[piv * a + col])) piv = row;
        if (std::abs(M[piv * a + col]) < 1e-11) return false;
        if (piv != col) {
            for (int j = 0; j < a; ++j) std::swap(M[piv * a + j], M[col * a + j]);
            std::swap(r[piv], r[col]);
        }
        double d = M[col * a + col];
        for (int row = 0; row < a; ++row) {
            if (row == col) continue;
            double f = M[row * a + col] / d;
            if (f == 0.0) continue;
            for (int j = col; j < a; ++j) M[row * a + j] -= f * M[col * a + j];
            r[row] -= f * r[col];
        }
    }
    for (int j = 0; j < a; ++j) r[j] /= M[j * a + j];
    return true;
}

// calls fn with every size-c subset of [0, pool) in lexicographic order
template <class Fn>
void for_each_subset(int pool, int c, Fn fn) {
    if (c > pool) return;
    std::vector<int> idx(c);
    for (int i = 0; i < c; ++i) idx[i] = i;
    while (true) {
        fn(idx);
        int p = c - 1;
        while (p >= 0 && idx[p] == pool - c + p) --p;
        if (p < 0) break;
        ++idx[p];
        for (int q = p + 1; q < c; ++q) idx[q] = idx[q - 1] + 1;
    }
}

}  // namespace

VertexResult vertex_solve(const LinearProgram& lp, double feas_tol) {
    const int n = lp.num_vars;
    const int m = static_cast<int>(lp.rows.size());
    for (int j = 0; j < n; ++j)
        if (!std::isfinite(lp.hi[j]))
            throw acqlab::InvalidInstance("vertex_solve: every bound must be finite");

    std::vector<int> eq_rows, ineq_rows;
    for (int r = 0; r < m; ++r)
        (lp.senses[r] == Sense::Eq ? eq_rows : ineq_rows).push_back(r);
    const int e = static_cast<int>(eq_rows.size());
    if (e > n) throw acqlab::InvalidInstance("vertex_solve: more equalities than variables");

    VertexResult best;
    best.status = LpStatus::Infeasible;
    best.objective = -kInf;

    std::vector<double> x(n), M, rhs;
    std::vector<int> rows;
    std::vector<char> is_free(n, 0);

    auto evaluate = [&](const std::vector<int>& free_vars) {
        const int a = static_cast<int>(rows.size());
        std::fill(is_free.begin(), is_free.end(), 0);
        for (int j : free_vars) is_free[j] = 1;
        const int n_fixed = n - a;
        for (long mask = 0; mask < (1L << n_fixed); ++mask) {
            int fi = 0;
            for (int j = 0; j < n; ++j) {
                if (is_free[j]) continue;
                x[j] = (mask >> fi & 1) ? lp.hi[j] : lp.lo[j];
                ++fi;
            }
            if (a > 0) {
                M.assign(static_cast<size_t>(a) * a, 0.0);
                rhs.assign(a, 0.0);
                for (int r = 0; r < a; ++r) {
                    const std::vector<double>& row = lp.rows[rows[r]];
                    double b = lp.rhs[rows[r]];
                    for (int j = 0; j < n; ++j) {
                        if (is_free[j])
                            M[r * a + static_cast<int>(
                                          std::find(free_vars.begin(), free_vars.end(), j) -
                                          free_vars.begin())] = row[j];
                        else
                            b -= row[j] * x[j];
                    }
                    rhs[r] = b;
                }
                if (!solve_dense(M, rhs, a)) continue;
                bool in_bounds = true;
                for (int r = 0; r < a; ++r) {
                    int j = free_vars[r];
                    if (rhs[r] < lp.lo[j] - feas_tol || rhs[r] > lp.hi[j] + feas_tol) {
                        in_bounds = false;
                        break;
                    }
                    x[j] = std::clamp(rhs[r], lp.lo[j], lp.hi[j]);
                }
                if (!in_bounds) continue;
            }
            bool ok = true;
            for (int r = 0; r < m && ok; ++r) {
                double v = 0.0;
                for (int j = 0; j < n; ++j) v += lp.rows[r][j] * x[j];
                switch (lp.senses[r]) {
                    case Sense::Le: ok = v <= lp.rhs[r] + feas_tol; break;
                    case Sense::Ge: ok = v >= lp.rhs[r] - feas_tol; break;
                    case Sense::Eq: ok = std::abs(v - lp.rhs[r]) <= feas_tol; break;
                }
            }
            if (!ok) continue;
            double obj = 0.0;
            for (int j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
            if (best.status != LpStatus::Optimal || obj > best.objective) {
                best.status = LpStatus::Optimal;
                best.objective = obj;
                best.x.assign(x.begin(), x.end());
            }
        }
    };

    for (int extra = 0; e + extra <= n && extra <= static_cast<int>(ineq_rows.size()); ++extra) {
        for_each_subset(static_cast<int>(ineq_rows.size()), extra, [&](const std::vector<int>& pick) {
            rows = eq_rows;
            for (int p : pick) rows.push_back(ineq_rows[p]);
            const int a = static_cast<int>(rows.size());
            for_each_subset(n, a, [&](const std::vector<int>& free_vars) { evaluate(free_vars); });
        });
    }
    return best;
}

LinearProgram random_box_lp(acqlab::Rng& rng, int max_vars, int max_cons) {
    LinearProgram lp;
    int n = 1 + static_cast<int>(rng.uniform01() * max_vars);
    n = std::min(n, max_vars);
    int m = static_cast<int>(rng.uniform01() * (max_cons + 1));
    m = std::min(m, max_cons);

    auto dyadic = [&](double lo, double hi) {
        double u = lo + rng.uniform01() * (hi - lo);
        return std::floor(u * 8.0) / 8.0;
    };

    for (int j = 0; j < n; ++j) {
        double lo = dyadic(-2.0, 2.0);
        double width = std::floor(rng.uniform01() * 24.0 + 1.0) / 8.0;
        lp.add_var(lo, lo + width);
        lp.objective[j] = dyadic(-2.0, 2.0);
    }
    // reference point keeps most rows satisfiable; equalities pass through it
    std::vector<double> x0(n);
    for (int j = 0; j < n; ++j) x0[j] = lp.lo[j] + rng.uniform01() * (lp.hi[j] - lp.lo[j]);

    int eq_budget = std::max(0, n - 1);
    for (int r = 0; r < m; ++r) {
        std::vector<double> row(n, 0.0);
        bool any = false;
        for (int j = 0; j < n; ++j) {
            row[j] = dyadic(-2.0, 2.0);
            any = any || row[j] != 0.0;
        }
        if (!any) row[static_cast<int>(rng.uniform01() * n) % n] = 0.5;
        double at_x0 = 0.0;
        for (int j = 0; j < n; ++j) at_x0 += row[j] * x0[j];
        double u = rng.uniform01();
        if (u < 0.15 && eq_budget > 0) {
            --eq_budget;
            lp.add_constraint(std::move(row), Sense::Eq, at_x0);
        } else if (u < 0.575) {
            double off = rng.uniform01() < 0.1 ? -2.0 - rng.uniform01()
                                               : dyadic(-0.25, 1.5);
            lp.add_constraint(std::move(row), Sense::Le, at_x0 + off);
        } else {
            double off = rng.uniform01() < 0.1 ? 2.0 + rng.uniform01()
                                               : dyadic(-1.5, 0.25);
            lp.add_constraint(std::move(row), Sense::Ge, at_x0 + off);
        }
    }
    return lp;
}

namespace {

// agent i's averaged signal-state law under own action b_i, summed over the
// other agents' signals; recomputed directly from the joint tables
std::vector<double> avg_marginal(const GameInstance& g, int i, int b_i) {
    std::vector<double> out(static_cast<size_t>(g.l) * g.m, 0.0);
    long others_b = acqlab::profile_count(g.n_agents - 1, g.k);
    long S = g.num_signal_profiles();
    for (long ob = 0; ob < others_b; ++ob) {
        long b = acqlab::compose_profile(i, g.n_agents, g.k, b_i, ob);
        for (long s = 0; s < S; ++s) {
            int s_i = acqlab::digit_of(s, i, g.n_agents, g.l);
            for (int t = 0; t < g.m; ++t) out[s_i * g.m + t] += g.joint_p(b, s, t);
        }
    }
    for (double& v : out) v /= static_cast<double>(others_b);
    return out;
}

}  // namespace

BruteResponse brute_best_response(const GameInstance& g, int i,
                                  const std::vector<double>& gamma_i) {
    long n_maps = 1;
    for (int s = 0; s < g.l; ++s) n_maps *= g.l;
    BruteResponse best;
    best.value = -kInf;
    std::vector<int> rep(g.l);
    for (int b_i = 0; b_i < g.k; ++b_i) {
        std::vector<double> marg = avg_marginal(g, i, b_i);
        for (long code = 0; code < n_maps; ++code) {
            long c = code;
            for (int s = 0; s < g.l; ++s) {
                rep[s] = static_cast<int>(c % g.l);
                c /= g.l;
            }
            double v = -g.costs[i][b_i];
            for (int s = 0; s < g.l; ++s)
                for (int t = 0; t < g.m; ++t)
                    v += marg[s * g.m + t] * gamma_i[rep[s] * g.m + t];
            if (v > best.value) {
                best.value = v;
                best.action = b_i;
                best.report_map = rep;
                best.tied = false;
            } else if (v == best.value) {
                best.tied = true;
            }
        }
    }
    return best;
}

double brute_truthful_value(const GameInstance& g, const acqlab::CorrelatedMechanism& mech,
                            int i) {
    long B = g.num_profiles(), S = g.num_signal_profiles();
    double tot = 0.0;
    for (long b = 0; b < B; ++b) {
        if (mech.mu[b] == 0.0) continue;
        int b_i = acqlab::digit_of(b, i, g.n_agents, g.k);
        double inner = -g.costs[i][b_i];
        for (long s = 0; s < S; ++s)
            for (int t = 0; t < g.m; ++t)
                inner += g.joint_p(b, s, t) * mech.gamma[i][(b * S + s) * g.m + t];
        tot += mech.mu[b] * inner;
    }
    return tot;
}

double brute_best_deviation_value(const GameInstance& g, const acqlab::CorrelatedMechanism& mech,
                                  int i) {
    long S = g.num_signal_profiles();
    long others_b = acqlab::profile_count(g.n_agents - 1, g.k);
    long n_maps = 1;
    for (int s = 0; s < g.l; ++s) n_maps *= g.l;
    std::vector<int> rep(g.l);
    double total = 0.0;
    for (int b_i = 0; b_i < g.k; ++b_i) {
        double recommended_mass = 0.0;
        for (long ob = 0; ob < others_b; ++ob)
            recommended_mass += mech.mu[acqlab::compose_profile(i, g.n_agents, g.k, b_i, ob)];
        double best = -kInf;
        for (int bp = 0; bp < g.k; ++bp) {
            for (long code = 0; code < n_maps; ++code) {
                long c = code;
                for (int s = 0; s < g.l; ++s) {
                    rep[s] = static_cast<int>(c % g.l);
                    c /= g.l;
                }
                double v = -recommended_mass * g.costs[i][bp];
                for (long ob = 0; ob < others_b; ++ob) {
                    long b = acqlab::compose_profile(i, g.n_agents, g.k, b_i, ob);
                    if (mech.mu[b] == 0.0) continue;
                    long b_play = acqlab::with_digit(b, i, g.n_agents, g.k, bp);
                    for (long s = 0; s < S; ++s) {
                        int s_i = acqlab::digit_of(s, i, g.n_agents, g.l);
                        long s_rep = acqlab::with_digit(s, i, g.n_agents, g.l, rep[s_i]);
                        for (int t = 0; t < g.m; ++t)
                            v += mech.mu[b] * g.joint_p(b_play, s, t) *
                                 mech.gamma[i][(b * S + s_rep) * g.m + t];
                    }
                }
                best = std::max(best, v);
            }
        }
        total += best;
    }
    return total;
}

}  // namespace oracle
