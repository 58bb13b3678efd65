#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hem/data.hpp"
#include "hem/error.hpp"
#include "hem/features.hpp"
#include "hem/gir.hpp"
#include "hem/inference.hpp"
#include "hem/model.hpp"
#include "hem/timing.hpp"

namespace hem {

using Json = nlohmann::json;

struct PathConfig {
    std::string events, nodes, posterior;
    std::string output = "out";
};

struct SimulateConfig {
    std::size_t events = 100;
    std::size_t nodes = 5;  // used when no node table is given
    ModelParams params;
};

struct HoldoutConfig {
    double fraction = 0.1;
    std::size_t replications = 500;
    std::size_t warmup = 0;
    std::size_t particles = 512;
};

struct PpcConfig {
    std::size_t replications = 500;
    std::size_t pp_points = 100;
    bool use_params = false;  // simulate from simulate.params instead of a posterior file
};

struct DiagnoseConfig {
    double frac_a = 0.1, frac_b = 0.5;
};

/// Everything a command needs besides its input files.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    PathConfig paths;
    double t0 = 0.0;
    Epoch epoch{};
    FeatureSpec features = FeatureSpec::make({}, {});
    TimingModel timing = TimingModel::make(Family::lognormal);
    PriorSpec prior;
    McmcConfig mcmc;
    SimulateConfig simulate;
    gir::GirConfig gir;
    HoldoutConfig holdout;
    PpcConfig ppc;
    DiagnoseConfig diagnose;
};

namespace detail {

/// Reads the keys of one JSON object, rejecting any it does not know.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

    const Json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void get(const std::string& key, T& out) {
        if (const Json* v = find(key)) {
            try {
                out = v->get<T>();
            } catch (const Json::exception&) {
                throw ConfigError(where_ + "." + key + ": wrong type");
            }
        }
    }

    template <class T>
    void get(const std::string& key, std::optional<T>& out) {
        if (const Json* v = find(key)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            T t{};
            get(key, t);
            out = t;
        }
    }

    /// A number is read as a length-one vector.
    void get_vector(const std::string& key, std::vector<double>& out) {
        if (const Json* v = find(key); v && v->is_number()) {
            out = {v->get<double>()};
            return;
        }
        get(key, out);
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline void read_params(const Json& j, ModelParams& p, const std::string& where) {
    ObjectReader r(j, where);
    r.get("b", p.b);
    r.get("eta", p.eta);
    r.get("aux", p.aux);
}

inline Json params_json(const ModelParams& p) {
    Json j{{"b", p.b}, {"eta", p.eta}};
    j["aux"] = p.aux ? Json(*p.aux) : Json(nullptr);
    return j;
}

}  // namespace detail

inline TimingModel parse_timing(const Json& j, const std::string& where = "timing") {
    detail::ObjectReader r(j, where);
    std::string family = "lognormal";
    std::optional<std::string> link;
    std::optional<double> aux;
    r.get("family", family);
    r.get("link", link);
    r.get("aux", aux);
    const Family f = parse_family(family);
    TimingModel m = TimingModel::make(f, link ? std::optional<Link>(parse_link(*link)) : std::nullopt, aux);
    if (f == Family::exponential && aux) throw ConfigError(where + ".aux: the exponential family has no aux parameter");
    m.validate();
    return m;
}

inline Json timing_json(const TimingModel& m) {
    Json j{{"family", std::string(name(m.family))}, {"link", std::string(name(m.link))}};
    if (m.aux) j["aux"] = *m.aux;
    return j;
}

inline FeatureSpec parse_features(const Json& j) {
    detail::ObjectReader r(j, "features");
    std::vector<std::string> rn, tn;
    double window = 168.0;
    r.get("receiver", rn);
    r.get("timing", tn);
    r.get("window_hours", window);
    std::vector<ReceiverStat> rs;
    std::vector<TimingStat> ts;
    for (const auto& s : rn) rs.push_back(parse_receiver_stat(s));
    for (const auto& s : tn) ts.push_back(parse_timing_stat(s));
    return FeatureSpec::make(std::move(rs), std::move(ts), WindowSpec{window});
}

inline Json features_json(const FeatureSpec& f) {
    std::vector<std::string> rn, tn;
    for (auto s : f.receiver) rn.emplace_back(name(s));
    for (auto s : f.timing) tn.emplace_back(name(s));
    return Json{{"receiver", rn}, {"timing", tn}, {"window_hours", f.window.length}};
}

inline PriorSpec parse_prior(const Json& j, const std::string& where = "prior") {
    detail::ObjectReader r(j, where);
    PriorSpec p;
    r.get_vector("b_mean", p.mean_b);
    r.get_vector("b_var", p.var_b);
    r.get_vector("eta_mean", p.mean_eta);
    r.get_vector("eta_var", p.var_eta);
    r.get("aux_shape", p.aux_shape);
    r.get("aux_scale", p.aux_scale);
    r.get("flat", p.flat);
    return p;
}

inline Json prior_json(const PriorSpec& p) {
    return Json{{"b_mean", p.mean_b},       {"b_var", p.var_b},         {"eta_mean", p.mean_eta},
                {"eta_var", p.var_eta},     {"aux_shape", p.aux_shape}, {"aux_scale", p.aux_scale},
                {"flat", p.flat}};
}

inline McmcConfig parse_mcmc(const Json& j, McmcConfig c) {
    detail::ObjectReader r(j, "mcmc");
    r.get("outer", c.outer);
    r.get("inner_b", c.inner_b);
    r.get("inner_eta", c.inner_eta);
    r.get("burn_in", c.burn_in);
    r.get("thin", c.thin);
    r.get("scale_b", c.scale_b);
    r.get("scale_eta", c.scale_eta);
    r.get("scale_aux", c.scale_aux);
    r.get("adapt", c.adapt);
    return c;
}

inline Json mcmc_json(const McmcConfig& c) {
    return Json{{"outer", c.outer},         {"inner_b", c.inner_b},     {"inner_eta", c.inner_eta},
                {"burn_in", c.burn_in},     {"thin", c.thin},           {"scale_b", c.scale_b},
                {"scale_eta", c.scale_eta}, {"scale_aux", c.scale_aux}, {"adapt", c.adapt}};
}

inline gir::GirConfig parse_gir(const Json& j, gir::GirConfig c) {
    detail::ObjectReader r(j, "gir");
    r.get("events", c.E);
    r.get("nodes", c.A);
    r.get("P", c.P);
    r.get("Q", c.Q);
    if (const Json* t = r.find("timing")) c.model = parse_timing(*t, "gir.timing");
    r.get("rounds", c.rounds);
    r.get("thin_start", c.thin_start);
    r.get("thin_stride", c.thin_stride);
    r.get("covariate_seed", c.covariate_seed);
    r.get("quantiles", c.quantiles);
    if (const Json* p = r.find("prior")) c.prior = parse_prior(*p, "gir.prior");
    r.get("inner_b", c.inner_b);
    r.get("inner_eta", c.inner_eta);
    r.get("scale_b", c.scale_b);
    r.get("scale_eta", c.scale_eta);
    r.get("scale_aux", c.scale_aux);
    r.get("adapt", c.adapt);
    r.get("alpha", c.alpha);
    r.get("max_pp_deviation", c.max_pp_deviation);
    return c;
}

inline Json gir_json(const gir::GirConfig& c) {
    return Json{{"events", c.E},
                {"nodes", c.A},
                {"P", c.P},
                {"Q", c.Q},
                {"timing", timing_json(c.model)},
                {"rounds", c.rounds},
                {"thin_start", c.thin_start},
                {"thin_stride", c.thin_stride},
                {"covariate_seed", c.covariate_seed},
                {"quantiles", c.quantiles},
                {"prior", prior_json(c.prior)},
                {"inner_b", c.inner_b},
                {"inner_eta", c.inner_eta},
                {"scale_b", c.scale_b},
                {"scale_eta", c.scale_eta},
                {"scale_aux", c.scale_aux},
                {"adapt", c.adapt},
                {"alpha", c.alpha},
                {"max_pp_deviation", c.max_pp_deviation}};
}

/// Builds a RunConfig from a parsed document. `seed` is required; unknown
/// keys are errors.
inline RunConfig parse_run_config(const Json& j) {
    RunConfig c;
    detail::ObjectReader r(j, "config");
    const Json* seed = r.find("seed");
    if (!seed) throw ConfigError("config.seed is required");
    if (!seed->is_number_unsigned()) throw ConfigError("config.seed must be a non-negative integer");
    c.seed = seed->get<std::uint64_t>();
    r.get("threads", c.threads);
    if (const Json* p = r.find("paths")) {
        detail::ObjectReader pr(*p, "paths");
        pr.get("events", c.paths.events);
        pr.get("nodes", c.paths.nodes);
        pr.get("posterior", c.paths.posterior);
        pr.get("output", c.paths.output);
    }
    r.get("t0", c.t0);
    if (const Json* e = r.find("epoch")) {
        if (!e->is_string()) throw ConfigError("config.epoch must be an ISO-8601 string");
        try {
            c.epoch = parse_epoch(e->get<std::string>());
        } catch (const DataError& err) {
            throw ConfigError(std::string("config.epoch: ") + err.what());
        }
    }
    if (const Json* f = r.find("features")) c.features = parse_features(*f);
    if (const Json* t = r.find("timing")) c.timing = parse_timing(*t);
    if (const Json* p = r.find("prior")) c.prior = parse_prior(*p);
    if (const Json* m = r.find("mcmc")) c.mcmc = parse_mcmc(*m, c.mcmc);
    c.mcmc.seed = c.seed;
    if (const Json* s = r.find("simulate")) {
        detail::ObjectReader sr(*s, "simulate");
        sr.get("events", c.simulate.events);
        sr.get("nodes", c.simulate.nodes);
        if (const Json* p = sr.find("params")) detail::read_params(*p, c.simulate.params, "simulate.params");
    }
    c.gir.seed = c.seed;
    c.gir.covariate_seed = c.seed;
    if (const Json* g = r.find("gir")) c.gir = parse_gir(*g, c.gir);
    if (const Json* h = r.find("holdout")) {
        detail::ObjectReader hr(*h, "holdout");
        hr.get("fraction", c.holdout.fraction);
        hr.get("replications", c.holdout.replications);
        hr.get("warmup", c.holdout.warmup);
        hr.get("particles", c.holdout.particles);
        if (!(c.holdout.fraction >= 0.0 && c.holdout.fraction < 1.0))
            throw ConfigError("holdout.fraction must be in [0, 1)");
        if (c.holdout.particles == 0) throw ConfigError("holdout.particles must be positive");
    }
    if (const Json* p = r.find("ppc")) {
        detail::ObjectReader pr(*p, "ppc");
        pr.get("replications", c.ppc.replications);
        pr.get("pp_points", c.ppc.pp_points);
        pr.get("use_params", c.ppc.use_params);
    }
    if (const Json* d = r.find("diagnose")) {
        detail::ObjectReader dr(*d, "diagnose");
        dr.get("frac_a", c.diagnose.frac_a);
        dr.get("frac_b", c.diagnose.frac_b);
    }
    c.mcmc.validate();
    c.prior.validate(c.features.receiver_dim(), c.features.timing_dim());
    return c;
}

/// Applies a `dotted.key=value` override; the value is parsed as JSON, or
/// taken as a string when it is not valid JSON.
inline void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string pointer;
    const std::string key = assignment.substr(0, eq);
    std::size_t start = 0;
    while (start <= key.size()) {
        std::size_t dot = key.find('.', start);
        if (dot == std::string::npos) dot = key.size();
        if (dot == start) throw ConfigError("override key '" + key + "' has an empty component");
        pointer += "/" + key.substr(start, dot - start);
        start = dot + 1;
    }
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    doc[Json::json_pointer(pointer)] = std::move(value);
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    return j;
}

/// Echo of the resolved configuration, written next to every output.
inline Json run_config_json(const RunConfig& c) {
    Json j{{"seed", c.seed},
           {"paths",
            {{"events", c.paths.events},
             {"nodes", c.paths.nodes},
             {"posterior", c.paths.posterior},
             {"output", c.paths.output}}},
           {"t0", c.t0},
           {"features", features_json(c.features)},
           {"timing", timing_json(c.timing)},
           {"prior", prior_json(c.prior)},
           {"mcmc", mcmc_json(c.mcmc)},
           {"simulate",
            {{"events", c.simulate.events}, {"nodes", c.simulate.nodes}, {"params", detail::params_json(c.simulate.params)}}},
           {"gir", gir_json(c.gir)},
           {"holdout",
            {{"fraction", c.holdout.fraction},
             {"replications", c.holdout.replications},
             {"warmup", c.holdout.warmup},
             {"particles", c.holdout.particles}}},
           {"ppc", {{"replications", c.ppc.replications}, {"pp_points", c.ppc.pp_points}, {"use_params", c.ppc.use_params}}},
           {"diagnose", {{"frac_a", c.diagnose.frac_a}, {"frac_b", c.diagnose.frac_b}}}};
    return j;
}

}  // namespace hem
