// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance <path to hem CLI> <work directory> [comma-separated criterion numbers]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "hem/evaluation.hpp"
#include "hem/gir.hpp"
#include "hem/mbg.hpp"

using namespace hem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome join(std::vector<Outcome> parts) {
    Outcome o;
    for (auto& p : parts) {
        o.pass = o.pass && p.pass;
        o.detail += (o.detail.empty() ? "" : "; ") + p.detail;
    }
    return o;
}

// 1 -------------------------------------------------------------------------

double brute_log_z(const std::vector<double>& lambda, std::size_t self) {
    const std::size_t A = lambda.size();
    long double z = 0;
    for (std::uint32_t mask = 1; mask < (1u << A); ++mask) {
        if (mask >> self & 1u) continue;
        long double dot = 0;
        for (std::size_t j = 0; j < A; ++j)
            if (mask >> j & 1u) dot += lambda[j];
        z += std::exp(dot);
    }
    return static_cast<double>(std::log(z));
}

Outcome normalizer_oracle() {
    Engine rng(101);
    double worst = 0;
    for (std::size_t A = 2; A <= 6; ++A)
        for (int rep = 0; rep < 200; ++rep) {
            std::normal_distribution<double> z(0.0, rep % 2 ? 3.0 : 0.7);
            std::vector<double> l(A);
            for (auto& x : l) x = z(rng);
            const std::size_t self = static_cast<std::size_t>(rep) % A;
            worst = std::max(worst, std::abs(mbg::log_normalizer(l, self) - brute_log_z(l, self)));
        }
    return {worst < 1e-10, fmt("max |logZ - enumeration| = %.2e over 1000 vectors", worst)};
}

// 2 -------------------------------------------------------------------------

Outcome mbg_sampler() {
    Engine rng(102);
    std::map<std::uint32_t, long> counts;
    const long n = 1'000'000;
    const std::vector<double> zero4(4, 0.0);
    for (long k = 0; k < n; ++k) {
        const auto u = mbg::sample(zero4, 0, rng);
        std::uint32_t c = 0;
        for (std::size_t j = 0; j < 4; ++j) c |= static_cast<std::uint32_t>(u[j]) << j;
        ++counts[c];
    }
    double tv = 0;
    for (std::uint32_t c = 2; c < 16; c += 2) tv += std::abs(static_cast<double>(counts[c]) / n - 1.0 / 7.0);
    long outside = 0;
    for (const auto& [c, k] : counts)
        if (c % 2 == 1 || c == 0) outside += k;
    tv = 0.5 * (tv + static_cast<double>(outside) / n);

    const std::vector<double> zero5(5, 0.0);
    double total = 0;
    for (long k = 0; k < n; ++k) {
        const auto u = mbg::sample(zero5, 2, rng);
        total += std::accumulate(u.begin(), u.end(), 0.0);
    }
    const double mean = total / n;
    return {tv < 0.005 && std::abs(mean - 32.0 / 15.0) < 0.01,
            fmt("A=4 TV to uniform = %.4f; A=5 mean receivers = %.4f (32/15 = %.4f)", tv, mean, 32.0 / 15.0)};
}

// 3 -------------------------------------------------------------------------

Outcome tied_equals_untied() {
    Engine rng(103);
    const std::array families{Family::exponential, Family::lognormal, Family::weibull, Family::gamma};
    const PriorSpec prior;
    double worst = 0, scale = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const std::size_t A = 3 + k % 4, E = 20 + k % 30;
        const Dataset d = fixtures::random_dataset(A, E, 1000 + k);
        const FeatureSpec spec = FeatureSpec::make({}, {TimingStat::gender, TimingStat::manager});
        const FitData f = FitData::build(d, spec);
        if (f.groups.size() != d.size()) return {false, "fixture unexpectedly has ties"};
        const Family fam = families[k % families.size()];
        const auto model = TimingModel::make(fam, std::nullopt,
                                             fam == Family::exponential ? std::nullopt : std::optional<double>(1.3));
        std::normal_distribution<double> z(0.0, 0.3);
        std::vector<double> eta(3);
        for (auto& v : eta) v = z(rng);
        eta[0] += std::log(5.0 * static_cast<double>(A));
        std::vector<NodeIndex> senders;
        std::vector<double> inc;
        double prev = d.t0();
        for (const auto& ev : d.events()) {
            senders.push_back(ev.sender);
            inc.push_back(ev.time - prev);
            prev = ev.time;
        }
        const double lp_prior = prior.log_prior_eta(eta) + (model.aux ? prior.log_prior_aux(*model.aux) : 0.0);
        const double tied = timing_log_likelihood(eta, model, f) + lp_prior;
        const double untied = timing_log_likelihood_untied(eta, model, f.cov, senders, inc) + lp_prior;
        worst = std::max(worst, std::abs(tied - untied));
        scale = std::max(scale, std::abs(untied));
    }
    return {worst < 1e-12, fmt("max |tied - untied| log posterior = %.2e over 100 fixtures (max |log posterior| %.0f)", worst, scale)};
}

// 4 -------------------------------------------------------------------------

struct ConstantSource {
    std::vector<double> x, y;
    std::size_t receiver_dim() const { return 1; }
    std::size_t timing_dim() const { return 1; }
    void begin_event(std::size_t, double) {}
    void observe(NodeIndex, std::span<const std::uint8_t>, double) {}
    std::span<const double> receiver_block() const { return x; }
    std::span<const double> timing_block() const { return y; }
};

Outcome competing_risks() {
    // Rates 1, 2, 3 are means 1, 1/2, 1/3 under the log link.
    const std::vector<double> mu{1.0, 0.5, 1.0 / 3.0};
    ConstantSource src{std::vector<double>(9, 1.0), {std::log(mu[0]), std::log(mu[1]), std::log(mu[2])}};
    const ModelParams p{{0.0}, {1.0}, std::nullopt};
    const auto model = TimingModel::make(Family::exponential);
    const std::size_t E = 100'000;
    const auto sim = simulate(E, NodeTable::anonymous(3), p, src, model, 0.0, Epoch{}, seeded_streams(104),
                              SimulationOptions{false});
    std::vector<double> freq(3, 0.0);
    for (const auto& ev : sim.data.events()) freq[ev.sender] += 1.0 / E;
    const std::vector<double> target{1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0};
    double freq_err = 0, pi_err = 0;
    for (std::size_t i = 0; i < 3; ++i) freq_err = std::max(freq_err, std::abs(freq[i] - target[i]));
    Engine rng(105);
    for (double tau : {0.01, 0.3, 1.0, 5.0, 30.0}) {
        const auto imp = impute_sender(tau, mu, model, rng);
        for (std::size_t i = 0; i < 3; ++i) pi_err = std::max(pi_err, std::abs(imp.pi[i] - target[i]));
    }
    return {freq_err < 0.01 && pi_err < 1e-12,
            fmt("win frequencies (%.4f, %.4f, %.4f), max dev %.4f; max |pi - target| = %.2e", freq[0], freq[1],
                freq[2], freq_err, pi_err)};
}

// 5 -------------------------------------------------------------------------

struct ColumnSummary {
    double mean, sd, lo, hi;
};

ColumnSummary summarize_column(const std::vector<double>& v) {
    const double q[] = {0.025, 0.975};
    const auto ci = stats::quantiles(v, q);
    return {stats::mean(v), std::sqrt(stats::variance(v)), ci[0], ci[1]};
}

Outcome parameter_recovery() {
    const std::size_t E = 500, A = 5, P = 3, Q = 2, seeds = 20;
    McmcConfig cfg;
    cfg.outer = 10'000;
    cfg.burn_in = 2'000;
    cfg.thin = 8;
    std::vector<Outcome> parts;
    for (const Family fam : {Family::exponential, Family::lognormal}) {
        const auto model = TimingModel::make(fam, std::nullopt,
                                             fam == Family::exponential ? std::nullopt : std::optional<double>(0.6));
        const ModelParams truth{{-0.8, 0.6, -0.4}, {0.5, -0.3}, model.aux};
        std::size_t covered = 0, total = 0, within3 = 0, fits_all_within = 0;
        double worst_z = 0;
        for (std::uint64_t s = 0; s < seeds; ++s) {
            const std::uint64_t seed = 5000 + s + (fam == Family::exponential ? 0 : 100);
            const Covariates cov = gir::synthetic_covariates(E, A, P, Q, seed);
            FixedFeatures src(cov);
            const auto sim = simulate(E, NodeTable::anonymous(A), truth, src, model, 0.0, Epoch{}, seeded_streams(seed),
                                      SimulationOptions{false});
            cfg.seed = seed;
            const auto post = run_mcmc(FitData::build(sim.data, cov), model, PriorSpec{}, cfg);
            std::vector<double> t(truth.b);
            t.insert(t.end(), truth.eta.begin(), truth.eta.end());
            if (truth.aux) t.push_back(*truth.aux);
            bool all = true;
            for (std::size_t k = 0; k < t.size(); ++k) {
                const auto c = summarize_column(post.column(2 + k));
                const double z = std::abs(c.mean - t[k]) / c.sd;
                worst_z = std::max(worst_z, z);
                ++total;
                covered += c.lo <= t[k] && t[k] <= c.hi;
                within3 += z < 3.0;
                all = all && z < 3.0;
            }
            fits_all_within += all;
        }
        const double coverage = static_cast<double>(covered) / static_cast<double>(total);
        parts.push_back({fits_all_within == seeds && coverage >= 0.85,
                         fmt("%s: %zu/%zu fits with every coefficient within 3 SD (max z %.2f), 95%% coverage %.3f",
                             std::string(name(fam)).c_str(), fits_all_within, seeds, worst_z, coverage)});
    }
    return join(parts);
}

// 6 -------------------------------------------------------------------------

Outcome gir_desk() {
    gir::GirConfig g;
    g.E = 50;
    g.A = 5;
    g.P = 4;
    g.Q = 3;
    g.model = TimingModel::make(Family::lognormal);
    g.rounds = 20'000;
    g.thin_start = 2'008;
    g.thin_stride = 9;
    g.seed = 106;
    g.covariate_seed = 106;
    const auto rep = gir::run(g);
    std::string failing;
    double worst_pp = 0;
    for (const auto& s : rep.statistics) {
        worst_pp = std::max(worst_pp, s.max_pp_deviation);
        if (!rep.statistic_passes(s)) failing += (failing.empty() ? "" : ",") + s.name;
    }
    const auto neg = gir::run<mbg::UncorrectedNormalizer>(g);
    const bool control_fails = neg.min_p_value() < 1e-3;
    return {rep.passes() && control_fails,
            fmt("%zu retained; exact: min p %.2e, max P-P %.3f, failing [%s]; uncorrected control: min p %.2e",
                g.retained(), rep.min_p_value(), worst_pp, failing.c_str(), neg.min_p_value())};
}

// 7 -------------------------------------------------------------------------

Outcome prediction() {
    double unit = 0;
    unit = std::max(unit, std::abs(*f1_score(Confusion{1, 1, 1}) - 0.5));
    unit = std::max(unit, std::abs(*f1_score(Confusion{5, 0, 0}) - 1.0));
    unit = std::max(unit, std::abs(*f1_score(Confusion{3, 1, 2}) - 2.0 / 3.0));
    unit = std::max(unit, std::abs(*mdape(1.0, std::vector<double>{2.0, 0.5, 1.0}) - 0.5));
    unit = std::max(unit, std::abs(*mdape(2.5, std::vector<double>{2.5, 2.5, 2.5})));
    unit = std::max(unit, std::abs(*mdape(4.0, std::vector<double>{2.0, 6.0}) - 0.5));

    const std::size_t A = 18, E = 500;
    const FeatureSpec spec = FeatureSpec::make({ReceiverStat::send}, {TimingStat::manager}, WindowSpec{24.0});
    const auto model = TimingModel::make(Family::lognormal, std::nullopt, 1.0);
    const ModelParams truth{{-1.5, 0.3}, {1.0, 2.0}, 1.0};
    const Dataset d = simulate(E, fixtures::nodes(A, 107), truth, spec, model, 0.0, Epoch{}, 107).data;
    const HoldoutMask mask = make_holdout(d, 0.1, 108);
    McmcConfig cfg;
    cfg.inner_b = 5;
    cfg.inner_eta = 5;
    cfg.seed = 109;
    PredictionOptions o;
    o.replications = 40;
    o.warmup = 10;
    o.init = truth;
    const auto rep = predict(d, mask, spec, model, PriorSpec{}, cfg, o);
    const double pi = rep.mean_sender_prob();
    return {unit < 1e-12 && pi > 1.0 / 18.0,
            fmt("unit fixtures max err %.1e; A=18 mean correct-sender probability %.4f vs baseline %.4f over %zu events",
                unit, pi, 1.0 / 18.0, rep.sender_prob.size())};
}

// 8 -------------------------------------------------------------------------

Outcome ppc_calibration() {
    const std::size_t A = 10, E = 300, N = 200;
    const FeatureSpec spec = FeatureSpec::make({ReceiverStat::send}, {TimingStat::manager}, WindowSpec{24.0});
    const auto model = TimingModel::make(Family::lognormal, std::nullopt, 1.0);
    const ModelParams truth{{-1.5, 0.3}, {1.0, 2.0}, 1.0};
    double inside = 0, positions = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Dataset d = simulate(E, fixtures::nodes(A, 200 + s), truth, spec, model, 0.0, Epoch{}, 300 + s).data;
        const auto r = ppc_run({truth}, d, spec, model, N, 400 + s);
        for (auto [obs, sim] : {std::pair{&r.observed_out, &r.sim_out}, {&r.observed_in, &r.sim_in},
                                {&r.observed_sizes, &r.sim_sizes}}) {
            const double k = static_cast<double>(obs->size());
            inside += band_coverage(*obs, *sim, N) * k;
            positions += k;
        }
    }
    const double cov = inside / positions;
    return {cov >= 0.9, fmt("%.3f of %.0f positions inside the simulated 95%% bands", cov, positions)};
}

// 9 -------------------------------------------------------------------------

Outcome gradient_check() {
    const std::vector<ReceiverStat> pool{ReceiverStat::send,     ReceiverStat::receive,  ReceiverStat::outdegree,
                                         ReceiverStat::indegree, ReceiverStat::sibling,  ReceiverStat::two_send,
                                         ReceiverStat::interaction, ReceiverStat::gender_homophily};
    Engine rng(110);
    std::normal_distribution<double> z(0.0, 0.4);
    double worst = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const std::size_t A = 3 + k % 5;
        const Dataset d = fixtures::random_dataset(A, 20 + 3 * k, 2000 + k, k % 3 == 0);
        std::vector<ReceiverStat> chosen;
        for (auto s : pool)
            if (rng.uniform() < 0.4) chosen.push_back(s);
        const FitData f = FitData::build(d, FeatureSpec::make(chosen, {}, WindowSpec{10.0 + 40.0 * rng.uniform()}));
        std::vector<double> b(f.P());
        for (auto& v : b) v = z(rng);
        McmcConfig cfg;
        cfg.seed = 3000 + k;
        Sampler s(f, TimingModel::make(Family::exponential), PriorSpec{}, cfg);
        s.initialize(ModelParams{b, {0.0}, std::nullopt});
        const auto g = receiver_log_likelihood_gradient(b, f, s.latents());
        double num = 0, den = 0;
        for (std::size_t p = 0; p < b.size(); ++p) {
            auto up = b, dn = b;
            const double h = 1e-5;
            up[p] += h;
            dn[p] -= h;
            const double fd =
                (receiver_log_likelihood(up, f, s.latents()) - receiver_log_likelihood(dn, f, s.latents())) / (2 * h);
            num += (g[p] - fd) * (g[p] - fd);
            den += fd * fd;
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return {worst < 1e-5, fmt("max relative gradient error %.2e over 50 fixtures", worst)};
}

// 10 ------------------------------------------------------------------------

using Snapshot = std::map<std::string, std::string>;

Snapshot snapshot(const fs::path& dir) {
    Snapshot s;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        s[entry.path().filename().string()] = ss.str();
    }
    return s;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
    fs::create_directories(work);
    const fs::path out = work / "out";
    const fs::path cfg = work / "determinism.json";
    {
        std::ofstream c(cfg);
        c << R"({
  "seed": 111,
  "paths": {"events": ")" << (work / "events.csv").string() << R"(", "output": ")" << out.string() << R"("},
  "features": {"receiver": ["send", "outdegree"], "timing": ["outdegree"], "window_hours": 24},
  "timing": {"family": "lognormal", "aux": 0.8},
  "simulate": {"events": 200, "nodes": 6, "params": {"b": [-1.0, 0.4, 0.05], "eta": [0.5, 0.02]}},
  "mcmc": {"outer": 400, "burn_in": 100, "thin": 3, "inner_b": 5, "inner_eta": 5},
  "gir": {"events": 20, "nodes": 4, "P": 2, "Q": 2, "rounds": 300, "thin_start": 50, "thin_stride": 5}
})";
    }
    const fs::path log = work / "cli.log";
    auto run = [&](const std::string& cmd, int threads) {
        fs::remove_all(out);
        const std::string nodes =
            cmd == "simulate" ? "" : " -s 'paths.nodes=\"" + (work / "nodes.csv").string() + "\"'";
        const std::string line = "\"" + cli + "\" -c \"" + cfg.string() + "\"" + nodes + " -t " + std::to_string(threads) +
                                 " " + cmd + " >> \"" + log.string() + "\" 2>&1";
        if (std::system(line.c_str()) != 0) throw std::runtime_error("CLI command failed: " + line);
        return snapshot(out);
    };
    std::vector<Outcome> parts;
    for (const std::string cmd : {"simulate", "fit", "gir"}) {
        const Snapshot a = run(cmd, 1), b = run(cmd, 1), c = run(cmd, 8);
        if (cmd == "simulate")
            for (const char* f : {"events.csv", "nodes.csv"})
                fs::copy_file(out / f, work / f, fs::copy_options::overwrite_existing);
        parts.push_back({!a.empty() && a == b && a == c,
                         fmt("%s: %zu files %s", cmd.c_str(), a.size(),
                             a == b && a == c ? "identical across reruns and 1 vs 8 threads" : "differ")});
    }
    return join(parts);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3 && argc != 4) {
        std::fprintf(stderr, "usage: %s <hem CLI> <work dir> [criteria, e.g. 1,3,10]\n", argv[0]);
        return 2;
    }
    std::set<std::size_t> only;
    if (argc == 4) {
        std::stringstream list(argv[3]);
        for (std::string item; std::getline(list, item, ',');) only.insert(std::stoul(item));
    }
    const std::string cli = argv[1];
    const fs::path work = argv[2];
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"normalizer oracle", normalizer_oracle},
        {"MB_G sampler", mbg_sampler},
        {"tied likelihood reduces to untied", tied_equals_untied},
        {"competing risks", competing_risks},
        {"parameter recovery", parameter_recovery},
        {"GiR desk scale", gir_desk},
        {"prediction metrics", prediction},
        {"PPC calibration", ppc_calibration},
        {"gradient check", gradient_check},
        {"determinism", [&] { return determinism(cli, work); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (!only.empty() && !only.contains(k + 1)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s %2zu %s: %s (%.0f s)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
