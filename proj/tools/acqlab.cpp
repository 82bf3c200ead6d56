#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acqlab/errors.hpp"
#include "acqlab/game.hpp"
#include "acqlab/gen.hpp"
#include "acqlab/offline.hpp"
#include "acqlab/online.hpp"
#include "acqlab/response.hpp"
#include "acqlab/sim.hpp"

using nlohmann::json;

namespace {

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw acqlab::ParseError("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw acqlab::ParseError("cannot open output path: " + out_path);
    f << text;
}

std::uint64_t parse_u64(const std::string& tok, const char* what) {
    try {
        size_t pos = 0;
        std::uint64_t v = std::stoull(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw acqlab::ParseError(std::string(what) + ": bad integer '" + tok + "'");
    }
}

std::vector<std::uint64_t> parse_seeds(const std::string& seeds_csv, const std::string& range) {
    std::vector<std::uint64_t> out;
    if (!seeds_csv.empty()) {
        std::stringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(parse_u64(tok, "--seeds"));
    }
    if (!range.empty()) {
        auto pos = range.find("..");
        if (pos == std::string::npos) throw acqlab::ParseError("--seed-range: expected a..b");
        std::uint64_t a = parse_u64(range.substr(0, pos), "--seed-range");
        std::uint64_t b = parse_u64(range.substr(pos + 2), "--seed-range");
        if (b < a) throw acqlab::ParseError("--seed-range: upper end below lower end");
        for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    }
    std::vector<std::uint64_t> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw acqlab::ParseError("seed list contains duplicates");
    return out;
}

int pool_size() {
    if (const char* e = std::getenv("ACQLAB_THREADS")) {
        int v = std::atoi(e);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// bounded worker pool over [0, count); rethrows the first captured error
template <class Fn>
void parallel_for(std::size_t count, Fn fn) {
    std::size_t n_threads = std::min<std::size_t>(pool_size(), count);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errs(n_threads);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= count) break;
                    fn(i);
                }
            } catch (...) {
                errs[t] = std::current_exception();
                next.store(count);
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

struct GenOpts {
    double K = 0.0;
    bool has_K = false;
    std::string kind = "General";
    std::string dims = "2,2,2,2,2";
    std::uint64_t seed = 0;
    double min_iota = 0.0, min_ell = 0.0;
    std::string out;
};

int cmd_gen(const GenOpts& o) {
    acqlab::GameInstance g;
    if (o.has_K) {
        g = acqlab::gen_counterexample(o.K);
    } else {
        int dims[5];
        std::stringstream ss(o.dims);
        std::string tok;
        int got = 0;
        while (std::getline(ss, tok, ',')) {
            if (got >= 5) throw acqlab::ParseError("--dims: expected n,k,l,m,d");
            dims[got++] = static_cast<int>(parse_u64(tok, "--dims"));
        }
        if (got != 5) throw acqlab::ParseError("--dims: expected n,k,l,m,d");
        std::string kind = o.kind;
        std::transform(kind.begin(), kind.end(), kind.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        acqlab::Kind kv;
        if (kind == "pis")
            kv = acqlab::Kind::PIS;
        else if (kind == "general")
            kv = acqlab::Kind::General;
        else
            throw acqlab::ParseError("--kind: expected PIS or General");
        g = acqlab::gen_random(o.seed, kv, dims[0], dims[1], dims[2], dims[3], dims[4], o.min_iota,
                               o.min_ell);
    }
    write_output(o.out, acqlab::instance_to_json(g));
    return 0;
}

int cmd_solve(const std::string& instance_path, const std::string& out) {
    acqlab::GameInstance g = acqlab::load(instance_path);
    auto [mech, value] = acqlab::solve_offline_optimal(g);
    json j;
    j["value"] = value;
    j["mechanism"] = json::parse(acqlab::mechanism_to_json(g, mech));
    write_output(out, j.dump(2));
    return 0;
}

int cmd_solve_uncorr(const std::string& instance_path, const std::string& out,
                     const std::string& tie) {
    if (tie != "lex" && tie != "pf")
        throw acqlab::ParseError("--tie-break: expected lex or pf");
    acqlab::GameInstance g = acqlab::load(instance_path);
    auto [mech, value] = acqlab::solve_optimal_uncorrelated(g);
    double pf = acqlab::principal_utility_unc(g, mech);
    acqlab::Environment tmp;
    tmp.instance = g;
    acqlab::UncCommit sim = acqlab::prepare_uncorrelated(tmp, mech);
    json j;
    j["value"] = value;
    j["value_principal_favorable"] = pf;
    j["value_lexicographic"] = sim.exp_utility;
    j["tie_break"] = tie;
    j["value_simulated"] = tie == "pf" ? pf : sim.exp_utility;
    j["tie_break_changes_value"] = std::abs(pf - sim.exp_utility) > 1e-12;
    j["mechanism"] = json::parse(acqlab::mechanism_to_json(g, mech));
    write_output(out, j.dump(2));
    return 0;
}

int cmd_verify_ic(const std::string& instance_path, const std::string& mech_path, double tol,
                  const std::string& out) {
    acqlab::GameInstance g = acqlab::load(instance_path);
    acqlab::CorrelatedMechanism mech = acqlab::mechanism_from_json(g, read_file(mech_path));
    acqlab::IcReport rep = acqlab::verify_ic(g, mech);
    json j;
    j["min_slack"] = rep.min_slack;
    j["slack_per_agent"] = rep.slack;
    j["tolerance"] = tol;
    j["ic"] = rep.ic(tol);
    json w = json::array();
    for (const auto& dev : rep.worst) {
        json d;
        d["action_map"] = dev.action_map;
        d["report_map"] = dev.report_map;
        w.push_back(d);
    }
    j["worst_deviation"] = w;
    write_output(out, j.dump(2));
    return rep.ic(tol) ? 0 : 3;
}

int cmd_build_gamma(const std::string& instance_path, double budget, const std::string& out) {
    acqlab::GameInstance g = acqlab::load(instance_path);
    double M = budget > 0.0 ? budget : g.budget;
    acqlab::IncentivizingRules rules = acqlab::build_incentivizing_rules(g, M);
    json j;
    j["margin"] = rules.margin;
    j["budget"] = M;
    j["rules"] = rules.rules;
    write_output(out, j.dump(2));
    return 0;
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    double r_total = 0, r_explore = 0, r_commit = 0;
    bool clean_p = false, clean_c = false, ic_pass = false;
    bool committed = false, truncated = false;
    double ic_slack = std::numeric_limits<double>::quiet_NaN();
    long exploration_rounds = 0;
    std::string trace_csv;
};

SeedOutcome run_one_seed(const acqlab::GameInstance& g, double offline_value,
                         const acqlab::LearnerConfig& cfg, std::uint64_t seed, bool want_csv) {
    acqlab::Environment env;
    env.instance = g;
    env.seed = seed;
    env.offline_value = offline_value;
    acqlab::RunResult res = acqlab::run(env, cfg);
    acqlab::RegretSummary reg = acqlab::cumulative_regret(res.trace);
    SeedOutcome o;
    o.seed = seed;
    o.r_total = reg.total;
    o.r_explore = reg.exploration;
    o.r_commit = reg.commit;
    o.clean_p = acqlab::clean_event_prob(g, res.prob);
    o.clean_c = acqlab::clean_event_costs(g, res.costs);
    o.committed = res.committed;
    o.truncated = res.truncated;
    o.ic_pass = res.committed && res.ic_pass;
    if (res.committed) o.ic_slack = res.ic_slack;
    o.exploration_rounds = res.exploration_rounds;
    if (want_csv) o.trace_csv = acqlab::trace_to_csv(res.trace, g);
    return o;
}

double quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    double pos = p * (v.size() - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    double frac = pos - i;
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

int cmd_run_online(const std::string& instance_path, const std::string& config_path,
                   const std::string& seeds_csv, const std::string& seed_range,
                   const std::string& out_dir, bool strict_ic) {
    acqlab::GameInstance g = acqlab::load(instance_path);
    auto [cfg, cfg_seed] = acqlab::config_from_json(read_file(config_path));
    cfg.budget = g.budget;
    cfg.strict_ic = strict_ic;
    cfg = acqlab::resolve_config(cfg);
    cfg.rules = acqlab::build_incentivizing_rules(g, cfg.budget);

    std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv, seed_range);
    if (seeds.empty()) seeds.push_back(cfg_seed);

    double offline_value = acqlab::solve_offline_optimal(g).second;
    bool want_csv = !out_dir.empty();
    if (want_csv) std::filesystem::create_directories(out_dir);

    std::vector<SeedOutcome> results(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        results[i] = run_one_seed(g, offline_value, cfg, seeds[i], want_csv);
    });

    double sum = 0.0;
    long n_clean_p = 0, n_clean_c = 0, n_ic = 0, n_commit = 0, n_trunc = 0;
    std::vector<double> rts;
    json per_seed = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const SeedOutcome& o = results[i];
        sum += o.r_total;
        rts.push_back(o.r_total);
        n_clean_p += o.clean_p;
        n_clean_c += o.clean_c;
        n_ic += o.ic_pass;
        n_commit += o.committed;
        n_trunc += o.truncated;
        json e;
        e["seed"] = o.seed;
        e["R_T"] = o.r_total;
        e["R_T_exploration"] = o.r_explore;
        e["R_T_commit"] = o.r_commit;
        e["clean_prob"] = o.clean_p;
        e["clean_cost"] = o.clean_c;
        e["committed"] = o.committed;
        e["truncated"] = o.truncated;
        e["ic_pass"] = o.ic_pass;
        e["ic_slack"] = o.ic_slack;
        e["exploration_rounds"] = o.exploration_rounds;
        per_seed.push_back(e);
        if (want_csv) {
            std::string path = out_dir + "/trace_" + std::to_string(o.seed) + ".csv";
            std::ofstream f(path, std::ios::binary);
            if (!f) throw acqlab::ParseError("cannot open output path: " + path);
            f << o.trace_csv;
        }
    }
    double n = static_cast<double>(seeds.size());
    json agg;
    agg["instance"] = instance_path;
    agg["T"] = cfg.T;
    agg["n_seeds"] = seeds.size();
    agg["R_T"] = {{"mean", sum / n},
                  {"sum", sum},
                  {"min", quantile(rts, 0.0)},
                  {"q25", quantile(rts, 0.25)},
                  {"median", quantile(rts, 0.5)},
                  {"q75", quantile(rts, 0.75)},
                  {"max", quantile(rts, 1.0)}};
    agg["clean_prob_rate"] = n_clean_p / n;
    agg["clean_cost_rate"] = n_clean_c / n;
    agg["ic_pass_rate"] = n_ic / n;
    agg["committed_rate"] = n_commit / n;
    agg["truncated_rate"] = n_trunc / n;
    agg["per_seed"] = per_seed;
    std::string text = agg.dump(2);
    if (want_csv) {
        std::ofstream f(out_dir + "/aggregate.json", std::ios::binary);
        if (!f) throw acqlab::ParseError("cannot open output path: " + out_dir + "/aggregate.json");
        f << text;
    }
    std::cout << text << "\n";
    return 0;
}

int cmd_report(const std::string& instance_path, const std::string& config_path,
               const std::string& horizons_csv, const std::string& seeds_csv,
               const std::string& seed_range, const std::string& out, bool strict_ic) {
    acqlab::GameInstance g = acqlab::load(instance_path);
    auto [cfg0, cfg_seed] = acqlab::config_from_json(read_file(config_path));
    cfg0.budget = g.budget;
    cfg0.strict_ic = strict_ic;
    cfg0.rules = acqlab::build_incentivizing_rules(g, cfg0.budget);

    std::vector<long> horizons;
    {
        std::stringstream ss(horizons_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            horizons.push_back(static_cast<long>(parse_u64(tok, "--horizons")));
    }
    if (horizons.empty()) throw acqlab::ParseError("--horizons: at least one horizon required");
    std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv, seed_range);
    if (seeds.empty()) seeds.push_back(cfg_seed);

    double offline_value = acqlab::solve_offline_optimal(g).second;
    acqlab::InstanceConstants consts = acqlab::constants(g);

    struct Cell {
        long T;
        std::uint64_t seed;
        double rt, bound;
    };
    std::vector<Cell> cells;
    for (long T : horizons)
        for (std::uint64_t s : seeds) cells.push_back({T, s, 0.0, 0.0});
    parallel_for(cells.size(), [&](std::size_t i) {
        acqlab::LearnerConfig cfg = cfg0;
        cfg.T = cells[i].T;
        cells[i].bound = acqlab::regret_bound(g, consts, cfg);
        cells[i].rt = run_one_seed(g, offline_value, cfg, cells[i].seed, false).r_total;
    });

    std::ostringstream csv;
    csv << "T,seed,R_T,bound\n";
    for (const Cell& c : cells)
        csv << c.T << ',' << c.seed << ',' << fmt_full(c.rt) << ',' << fmt_full(c.bound) << '\n';
    write_output(out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mechanism lab for multi-agent information acquisition"};
    app.require_subcommand(1);

    GenOpts gen_o;
    auto* c_gen = app.add_subcommand("gen", "generate a game instance (JSON)");
    auto* opt_k = c_gen->add_option("--K", gen_o.K,
                                    "emit the two-agent separation instance with cost K");
    c_gen->add_option("--kind", gen_o.kind, "PIS or General (random instances)");
    c_gen->add_option("--dims", gen_o.dims, "n,k,l,m,d (random instances)");
    c_gen->add_option("--seed", gen_o.seed, "generator seed");
    c_gen->add_option("--min-iota", gen_o.min_iota, "minimum signal probability floor");
    c_gen->add_option("--min-ell", gen_o.min_ell, "minimum posterior separation floor");
    c_gen->add_option("--out", gen_o.out, "output path (default stdout)");

    std::string so_instance, so_out;
    auto* c_solve = app.add_subcommand("solve", "optimal correlated mechanism");
    c_solve->add_option("--instance", so_instance, "instance JSON path")->required();
    c_solve->add_option("--out", so_out, "output path (default stdout)");

    std::string su_instance, su_out, su_tie = "lex";
    auto* c_solveu = app.add_subcommand("solve-uncorr", "optimal uncorrelated mechanism");
    c_solveu->add_option("--instance", su_instance, "instance JSON path")->required();
    c_solveu->add_option("--out", su_out, "output path (default stdout)");
    c_solveu->add_option("--tie-break", su_tie, "agent tie-break for the simulated value: lex|pf");

    std::string vi_instance, vi_mech, vi_out;
    double vi_tol = 1e-8;
    auto* c_verify = app.add_subcommand("verify-ic", "check a correlated mechanism for IC");
    c_verify->add_option("--instance", vi_instance, "instance JSON path")->required();
    c_verify->add_option("--mechanism", vi_mech, "mechanism JSON path")->required();
    c_verify->add_option("--ic-tolerance", vi_tol, "slack tolerance");
    c_verify->add_option("--out", vi_out, "output path (default stdout)");

    std::string bg_instance, bg_out;
    double bg_budget = 0.0;
    auto* c_gamma = app.add_subcommand("build-gamma", "per-(agent, action) incentivizing rules");
    c_gamma->add_option("--instance", bg_instance, "instance JSON path")->required();
    c_gamma->add_option("--budget", bg_budget, "payment cap (default: instance budget)");
    c_gamma->add_option("--out", bg_out, "output path (default stdout)");

    std::string ro_instance, ro_config, ro_seeds, ro_range, ro_out;
    bool ro_strict = false;
    auto* c_run = app.add_subcommand("run-online", "seeded explore-then-commit episodes");
    c_run->add_option("--instance", ro_instance, "instance JSON path")->required();
    c_run->add_option("--config", ro_config, "learner config JSON path")->required();
    c_run->add_option("--seeds", ro_seeds, "comma-separated seed list");
    c_run->add_option("--seed-range", ro_range, "inclusive seed range a..b");
    c_run->add_option("--out", ro_out, "output directory for traces and aggregate");
    c_run->add_flag("--strict-ic", ro_strict, "refuse to commit non-IC mechanisms");

    std::string rp_instance, rp_config, rp_horizons, rp_seeds, rp_range, rp_out;
    bool rp_strict = false;
    auto* c_report = app.add_subcommand("report", "regret vs bound over horizons, tidy CSV");
    c_report->add_option("--instance", rp_instance, "instance JSON path")->required();
    c_report->add_option("--config", rp_config, "learner config JSON path")->required();
    c_report->add_option("--horizons", rp_horizons, "comma-separated horizon list")->required();
    c_report->add_option("--seeds", rp_seeds, "comma-separated seed list");
    c_report->add_option("--seed-range", rp_range, "inclusive seed range a..b");
    c_report->add_option("--out", rp_out, "output path (default stdout)");
    c_report->add_flag("--strict-ic", rp_strict, "refuse to commit non-IC mechanisms");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "ParseError"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        gen_o.has_K = opt_k->count() > 0;
        if (*c_gen) return cmd_gen(gen_o);
        if (*c_solve) return cmd_solve(so_instance, so_out);
        if (*c_solveu) return cmd_solve_uncorr(su_instance, su_out, su_tie);
        if (*c_verify) return cmd_verify_ic(vi_instance, vi_mech, vi_tol, vi_out);
        if (*c_gamma) return cmd_build_gamma(bg_instance, bg_budget, bg_out);
        if (*c_run)
            return cmd_run_online(ro_instance, ro_config, ro_seeds, ro_range, ro_out, ro_strict);
        if (*c_report)
            return cmd_report(rp_instance, rp_config, rp_horizons, rp_seeds, rp_range, rp_out,
                              rp_strict);
    } catch (const acqlab::AcqError& e) {
        std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << "\n";
        return 4;
    }
    return 0;
}
