#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hem/config.hpp"
#include "hem/evaluation.hpp"
#include "hem/gir.hpp"
#include "hem/inference.hpp"

namespace fs = std::filesystem;
using namespace hem;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, data_error = 3, numerical_error = 4 };

void log_line(const std::string& command, const std::string& msg) { std::cerr << "hem " << command << ": " << msg << '\n'; }

Progress progress_logger(const std::string& command) {
    return [command, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
        const std::size_t pct = total == 0 ? 100 : done * 100 / total;
        if (pct != last || done == total) {
            last = pct;
            std::cerr << "hem " << command << ": progress=" << done << '/' << total << '\n';
        }
    };
}

fs::path output_dir(const RunConfig& c) {
    fs::path dir(c.paths.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    return out;
}

void write_json(const fs::path& p, const Json& j) { open_out(p) << j.dump(2) << '\n'; }

std::string fmt(double x) { return csv::format_double(x); }

NodeTable nodes_for_read(const RunConfig& c) {
    if (c.paths.nodes.empty()) throw ConfigError("paths.nodes is required");
    return load_nodes(c.paths.nodes);
}

Dataset events_for_read(const RunConfig& c) {
    if (c.paths.events.empty()) throw ConfigError("paths.events is required");
    return load_events(c.paths.events, nodes_for_read(c), c.t0, c.epoch);
}

ModelParams simulation_params(const RunConfig& c) {
    ModelParams p = c.simulate.params;
    if (c.timing.has_aux() && !p.aux) p.aux = c.timing.aux;
    if (!c.timing.has_aux() && p.aux) throw ConfigError("simulate.params.aux given for the exponential family");
    p.validate(c.features.receiver_dim(), c.features.timing_dim());
    return p;
}

Json acceptance_json(const Acceptance& a) {
    auto one = [](const BlockStats& s) {
        return Json{{"proposed", s.proposed}, {"accepted", s.accepted}, {"rate", s.rate()}};
    };
    return Json{{"b", one(a.b)}, {"eta", one(a.eta)}, {"aux", one(a.aux)}};
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& c) {
    const NodeTable nodes = c.paths.nodes.empty() ? NodeTable::anonymous(c.simulate.nodes) : load_nodes(c.paths.nodes);
    if (nodes.size() < 2) throw ConfigError("simulation needs at least two nodes");
    const ModelParams p = simulation_params(c);
    const TimingModel m = p.aux ? c.timing.with_aux(*p.aux) : c.timing;
    const Simulation sim = simulate(c.simulate.events, nodes, p, c.features, m, c.t0, c.epoch, c.seed);
    const fs::path dir = output_dir(c);
    {
        auto out = open_out(dir / "events.csv");
        write_events(out, sim.data);
    }
    {
        auto out = open_out(dir / "nodes.csv");
        write_nodes(out, nodes);
    }
    {
        auto out = open_out(dir / "latents.csv");
        out << "race,node,increment,candidates\n";
        for (std::size_t r = 0; r < sim.draws.size(); ++r) {
            const auto& d = sim.draws[r];
            for (std::size_t i = 0; i < d.A; ++i) {
                std::string list;
                for (std::size_t j = 0; j < d.A; ++j)
                    if (d.row(i)[j]) list += (list.empty() ? "" : ";") + nodes.label(j);
                out << r << ',' << csv::escape(nodes.label(i)) << ',' << fmt(d.tau[i]) << ',' << csv::escape(list) << '\n';
            }
        }
    }
    write_json(dir / "config.json", run_config_json(c));
    log_line("simulate", "wrote " + std::to_string(sim.data.size()) + " events to " + (dir / "events.csv").string());
    return ok;
}

int cmd_fit(const RunConfig& c, const Execution& exec) {
    const Dataset d = events_for_read(c);
    if (d.empty()) throw DataError(DataErrorKind::empty_table, c.paths.events + ": no events");
    const PosteriorSamples post =
        run_mcmc(d, c.features, c.timing, c.prior, c.mcmc, exec, progress_logger("fit"));
    const fs::path dir = output_dir(c);
    {
        auto out = open_out(dir / "posterior.csv");
        post.write_csv(out);
    }
    write_json(dir / "acceptance.json",
               Json{{"sampling", acceptance_json(post.acceptance)},
                    {"burn_in", acceptance_json(post.burn_in_acceptance)},
                    {"final_scales", {{"b", post.final_scales[0]}, {"eta", post.final_scales[1]}, {"aux", post.final_scales[2]}}},
                    {"draws", post.size()}});
    write_json(dir / "config.json", run_config_json(c));
    log_line("fit", "stored " + std::to_string(post.size()) + " draws");
    return ok;
}

int cmd_gir(const RunConfig& c, const Execution& exec) {
    const gir::GirConfig& g = c.gir;
    g.validate();
    const Covariates cov = gir::synthetic_covariates(g.E, g.A, g.P, g.Q, g.covariate_seed);
    log_line("gir", "forward samples: " + std::to_string(g.retained()));
    const auto fwd = gir::forward_samples(g, cov, g.retained(), exec);
    const auto bwd = gir::backward_chain(g, cov, gir::mcmc_operator<mbg::ExactNormalizer>(), exec, progress_logger("gir"));
    const auto names = gir::statistic_names(g.P, g.Q, g.model.has_aux());
    const gir::GirReport rep = gir::compare(fwd, bwd, names, g.quantiles, g.alpha, g.max_pp_deviation);

    const fs::path dir = output_dir(c);
    Json rows = Json::array();
    for (const auto& s : rep.statistics)
        rows.push_back(Json{{"name", s.name},
                             {"forward_mean", stats::mean(s.forward)},
                             {"backward_mean", stats::mean(s.backward)},
                             {"t_statistic", s.t_test.statistic},
                             {"t_p_value", s.t_test.p_value},
                             {"mann_whitney_u", s.mann_whitney.statistic},
                             {"mann_whitney_p_value", s.mann_whitney.p_value},
                             {"max_pp_deviation", s.max_pp_deviation},
                             {"pass", rep.statistic_passes(s)}});
    write_json(dir / "gir_report.json", Json{{"config", gir_json(g)},
                                             {"seed", g.seed},
                                             {"retained", g.retained()},
                                             {"forward_samples", fwd.size()},
                                             {"backward_samples", bwd.size()},
                                             {"statistics", rows},
                                             {"pass", rep.passes()}});
    auto pp = open_out(dir / "gir_pp.csv");
    pp << "statistic,level,threshold,forward_cdf,backward_cdf,forward_quantile,backward_quantile\n";
    const auto grid = stats::probability_grid(g.quantiles);
    for (const auto& s : rep.statistics)
        for (std::size_t k = 0; k < grid.size(); ++k)
            pp << s.name << ',' << fmt(grid[k]) << ',' << fmt(s.pp.threshold[k]) << ',' << fmt(s.pp.fa[k]) << ','
               << fmt(s.pp.fb[k]) << ',' << fmt(s.forward_quantiles[k]) << ',' << fmt(s.backward_quantiles[k]) << '\n';
    write_json(dir / "config.json", run_config_json(c));
    log_line("gir", rep.passes() ? "all statistics pass" : "some statistics fail");
    return ok;
}

int cmd_predict(const RunConfig& c, const Execution& exec) {
    const Dataset d = events_for_read(c);
    const HoldoutMask mask = make_holdout(d, c.holdout.fraction, c.seed);
    PredictionOptions opts;
    opts.replications = c.holdout.replications;
    opts.warmup = c.holdout.warmup;
    opts.particles = c.holdout.particles;
    const PredictionReport rep =
        mask.empty() ? PredictionReport{} : predict(d, mask, c.features, c.timing, c.prior, c.mcmc, opts, exec);
    const fs::path dir = output_dir(c);
    auto num = [](double x) { return std::isnan(x) ? Json(nullptr) : Json(x); };
    write_json(dir / "prediction.json",
               Json{{"replications", mask.empty() ? 0 : rep.replications},
                    {"warmup", c.holdout.warmup},
                    {"fraction", c.holdout.fraction},
                    {"masked_senders", mask.senders.size()},
                    {"masked_receivers", mask.receivers.size()},
                    {"masked_timestamps", mask.timestamps.size()},
                    {"mean_correct_sender_probability", num(rep.mean_sender_prob())},
                    {"mean_f1", num(rep.mean_f1())},
                    {"f1_replications", rep.f1.size()},
                    {"median_mdape", num(rep.median_mdape())},
                    {"zero_increment_excluded", rep.zero_increment_excluded}});
    {
        auto out = open_out(dir / "prediction_senders.csv");
        out << "event,true_sender,correct_sender_probability\n";
        for (std::size_t k = 0; k < rep.sender_events.size(); ++k) {
            const std::size_t e = rep.sender_events[k];
            out << e << ',' << csv::escape(d.nodes().label(d.event(e).sender)) << ',' << fmt(rep.sender_prob[k]) << '\n';
        }
    }
    {
        auto out = open_out(dir / "prediction_receivers.csv");
        out << "event,receiver,observed,imputed_marginal\n";
        for (std::size_t k = 0; k < rep.receiver_positions.size(); ++k) {
            const auto [e, j] = rep.receiver_positions[k];
            out << e << ',' << csv::escape(d.nodes().label(j)) << ',' << int(rep.receiver_observed[k]) << ','
                << fmt(rep.receiver_marginal[k]) << '\n';
        }
    }
    {
        auto out = open_out(dir / "prediction_timestamps.csv");
        out << "event,observed_increment,mdape\n";
        for (std::size_t k = 0; k < rep.timestamp_events.size(); ++k) {
            out << rep.timestamp_events[k] << ',' << fmt(rep.timestamp_observed[k]) << ',';
            if (!std::isnan(rep.timestamp_mdape[k])) out << fmt(rep.timestamp_mdape[k]);
            out << '\n';
        }
    }
    write_json(dir / "config.json", run_config_json(c));
    return ok;
}

void write_band_table(const fs::path& p, const std::string& key, const std::vector<std::string>& labels,
                      const std::vector<double>& observed, const std::vector<double>& sim, std::size_t N) {
    auto out = open_out(p);
    out << key << ",observed,q025,q500,q975\n";
    const std::size_t K = observed.size();
    const double probs[] = {0.025, 0.5, 0.975};
    std::vector<double> col(N);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t n = 0; n < N; ++n) col[n] = sim[n * K + k];
        const auto q = N ? stats::quantiles(col, probs) : std::vector<double>{NAN, NAN, NAN};
        out << csv::escape(labels[k]) << ',' << fmt(observed[k]) << ',' << fmt(q[0]) << ',' << fmt(q[1]) << ','
            << fmt(q[2]) << '\n';
    }
}

void write_long_table(const fs::path& p, const std::string& key, const std::vector<std::string>& labels,
                      const std::vector<double>& observed, const std::vector<double>& sim, std::size_t N) {
    auto out = open_out(p);
    out << "replication," << key << ",value\n";
    const std::size_t K = observed.size();
    for (std::size_t k = 0; k < K; ++k) out << "observed," << csv::escape(labels[k]) << ',' << fmt(observed[k]) << '\n';
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k)
            out << n << ',' << csv::escape(labels[k]) << ',' << fmt(sim[n * K + k]) << '\n';
}

int cmd_ppc(const RunConfig& c, const Execution& exec) {
    const Dataset d = events_for_read(c);
    if (d.empty()) throw DataError(DataErrorKind::empty_table, c.paths.events + ": no events");
    std::vector<ModelParams> draws;
    if (c.ppc.use_params) {
        draws.push_back(simulation_params(c));
    } else {
        if (c.paths.posterior.empty()) throw ConfigError("paths.posterior is required unless ppc.use_params is set");
        std::ifstream in(c.paths.posterior);
        if (!in) throw DataError(DataErrorKind::io, "cannot open posterior '" + c.paths.posterior + "'");
        const PosteriorSamples post = PosteriorSamples::parse_csv(in, c.paths.posterior);
        if (post.size() == 0) throw DataError(DataErrorKind::empty_table, c.paths.posterior + ": no draws");
        for (std::size_t k : evenly_spaced(post.size(), c.ppc.replications)) draws.push_back(post.draw(k));
    }
    const PpcResult r = ppc_run(draws, d, c.features, c.timing, c.ppc.replications, c.seed, c.ppc.pp_points, exec);

    const fs::path dir = output_dir(c);
    std::vector<std::string> node_labels, size_labels, level_labels;
    for (std::size_t i = 0; i < r.A; ++i) node_labels.push_back(d.nodes().label(i));
    for (std::size_t s = 1; s <= r.max_size; ++s) size_labels.push_back(std::to_string(s));
    for (double p : stats::probability_grid(r.pp_points)) level_labels.push_back(fmt(p));
    write_band_table(dir / "ppc_outdegree.csv", "node", node_labels, r.observed_out, r.sim_out, r.N);
    write_band_table(dir / "ppc_indegree.csv", "node", node_labels, r.observed_in, r.sim_in, r.N);
    write_band_table(dir / "ppc_receiver_size.csv", "size", size_labels, r.observed_sizes, r.sim_sizes, r.N);
    write_long_table(dir / "ppc_outdegree_draws.csv", "node", node_labels, r.observed_out, r.sim_out, r.N);
    write_long_table(dir / "ppc_indegree_draws.csv", "node", node_labels, r.observed_in, r.sim_in, r.N);
    write_long_table(dir / "ppc_receiver_size_draws.csv", "size", size_labels, r.observed_sizes, r.sim_sizes, r.N);
    if (!r.pp_levels.empty())
        write_long_table(dir / "ppc_increment_pp.csv", "level", level_labels, r.pp_levels, r.sim_pp, r.N);
    write_json(dir / "ppc_summary.json",
               Json{{"replications", r.N},
                    {"max_receiver_size", r.max_size},
                    {"coverage_outdegree", band_coverage(r.observed_out, r.sim_out, r.N)},
                    {"coverage_indegree", band_coverage(r.observed_in, r.sim_in, r.N)},
                    {"coverage_receiver_size", band_coverage(r.observed_sizes, r.sim_sizes, r.N)}});
    write_json(dir / "config.json", run_config_json(c));
    return ok;
}

int cmd_diagnose(const RunConfig& c) {
    if (c.paths.posterior.empty()) throw ConfigError("paths.posterior is required");
    std::ifstream in(c.paths.posterior);
    if (!in) throw DataError(DataErrorKind::io, "cannot open posterior '" + c.paths.posterior + "'");
    const PosteriorSamples post = PosteriorSamples::parse_csv(in, c.paths.posterior);
    const auto cols = post.columns();
    const fs::path dir = output_dir(c);
    auto z = open_out(dir / "geweke.csv");
    z << "parameter,z\n";
    for (std::size_t k = 2; k < cols.size(); ++k) {
        const auto v = post.column(k);
        z << cols[k] << ',' << fmt(geweke_diag(v, c.diagnose.frac_a, c.diagnose.frac_b)) << '\n';
    }
    auto t = open_out(dir / "trace.csv");
    post.write_csv(t);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperedge event models: simulation, inference, GiR testing, prediction and checks"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::size_t> threads;
    app.add_option("-c,--config", config_path, "JSON run configuration")->required();
    app.add_option("-s,--set", overrides, "Override a config key: dotted.key=value (JSON value)");
    app.add_option("-t,--threads", threads, "Worker threads (0 = all cores)");
    const std::vector<std::string> names{"simulate", "fit", "gir", "predict", "ppc", "diagnose"};
    for (const auto& n : names) app.add_subcommand(n);
    app.get_subcommand("simulate")->description("Simulate an event log from given parameters");
    app.get_subcommand("fit")->description("Run the MCMC sampler on an event log");
    app.get_subcommand("gir")->description("Joint-distribution test of the sampler");
    app.get_subcommand("predict")->description("Held-out sender, receiver and timestamp prediction");
    app.get_subcommand("ppc")->description("Posterior predictive checks");
    app.get_subcommand("diagnose")->description("Geweke diagnostics of a posterior table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        Json doc = read_json_file(config_path);
        for (const auto& o : overrides) apply_override(doc, o);
        const RunConfig cfg = parse_run_config(doc);
        const Execution exec{threads.value_or(cfg.threads)};
        if (command == "simulate") return cmd_simulate(cfg);
        if (command == "fit") return cmd_fit(cfg, exec);
        if (command == "gir") return cmd_gir(cfg, exec);
        if (command == "predict") return cmd_predict(cfg, exec);
        if (command == "ppc") return cmd_ppc(cfg, exec);
        return cmd_diagnose(cfg);
    } catch (const ConfigError& e) {
        log_line(command, std::string("config error: ") + e.what());
        return config_error;
    } catch (const Json::exception& e) {
        log_line(command, std::string("config error: ") + e.what());
        return config_error;
    } catch (const DataError& e) {
        log_line(command, std::string("data error: ") + e.what());
        return data_error;
    } catch (const NumericalError& e) {
        log_line(command, std::string("numerical failure: ") + e.what());
        return numerical_error;
    } catch (const std::exception& e) {
        log_line(command, std::string("error: ") + e.what());
        return failure;
    }
}
