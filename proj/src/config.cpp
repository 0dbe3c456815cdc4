#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace geopinn {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void syntax_error(const std::string& origin, const std::string& text,
                               std::size_t byte, const std::string& what) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    std::ostringstream msg;
    msg << origin << ":" << line << ":" << col << ": " << what;
    throw ConfigError(ConfigError::Kind::Syntax, msg.str());
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError(ConfigError::Kind::UnknownKey,
                              "unknown key '" + key + "' in " + where);
    }
}

double need_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.at(key).is_number())
        throw ConfigError(ConfigError::Kind::Range, where + "." + key + " must be a number");
    return obj.at(key).get<double>();
}

long long get_int(const json& obj, const std::string& key, long long fallback,
                  const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number_integer())
        throw ConfigError(ConfigError::Kind::Range, where + "." + key + " must be an integer");
    return obj.at(key).get<long long>();
}

double get_num(const json& obj, const std::string& key, double fallback,
               const std::string& where) {
    if (!obj.contains(key)) return fallback;
    return need_number(obj, key, where);
}

std::string get_str(const json& obj, const std::string& key, const std::string& fallback,
                    const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string())
        throw ConfigError(ConfigError::Kind::Range, where + "." + key + " must be a string");
    return obj.at(key).get<std::string>();
}

void parse_einstein(const json& j, EinsteinConfig& cfg) {
    reject_unknown(j, {"n", "lambda", "weights", "overlap_annulus", "sample_radius",
                       "batch_einstein", "batch_overlap", "supervised_mix"},
                   "einstein");
    cfg.n = int(get_int(j, "n", cfg.n, "einstein"));
    cfg.lambda = int(get_int(j, "lambda", cfg.lambda, "einstein"));
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        if (!w.is_array() || w.size() != 3)
            throw ConfigError(ConfigError::Kind::Range,
                              "einstein.weights must be an array of 3 numbers");
        for (int i = 0; i < 3; ++i) cfg.weights[std::size_t(i)] = w.at(std::size_t(i)).get<double>();
    }
    if (j.contains("overlap_annulus")) {
        const auto& a = j.at("overlap_annulus");
        if (!a.is_array() || a.size() != 2)
            throw ConfigError(ConfigError::Kind::Range,
                              "einstein.overlap_annulus must be [r_lo, r_hi]");
        cfg.r_lo = a.at(0).get<double>();
        cfg.r_hi = a.at(1).get<double>();
    }
    cfg.sample_radius = get_num(j, "sample_radius", cfg.sample_radius, "einstein");
    cfg.batch_einstein = int(get_int(j, "batch_einstein", cfg.batch_einstein, "einstein"));
    cfg.batch_overlap = int(get_int(j, "batch_overlap", cfg.batch_overlap, "einstein"));
    cfg.supervised_mix = get_num(j, "supervised_mix", cfg.supervised_mix, "einstein");
}

void parse_nirenberg(const json& j, NirenbergConfig& cfg) {
    reject_unknown(j, {"prescriber", "fit_degree"}, "nirenberg");
    if (j.contains("prescriber")) {
        const auto& p = j.at("prescriber");
        reject_unknown(p, {"kind", "constant", "terms"}, "nirenberg.prescriber");
        cfg.prescriber.kind = get_str(p, "kind", cfg.prescriber.kind, "prescriber");
        cfg.prescriber.constant = get_num(p, "constant", cfg.prescriber.constant, "prescriber");
        cfg.prescriber.terms.clear();
        if (p.contains("terms")) {
            for (const auto& t : p.at("terms")) {
                reject_unknown(t, {"l", "m", "coeff"}, "prescriber term");
                PrescriberTerm term;
                term.ell = int(get_int(t, "l", 0, "prescriber term"));
                term.m = int(get_int(t, "m", 0, "prescriber term"));
                term.coeff = get_num(t, "coeff", 0.0, "prescriber term");
                cfg.prescriber.terms.push_back(term);
            }
        }
    }
    cfg.fit_degree = int(get_int(j, "fit_degree", cfg.fit_degree, "nirenberg"));
}

void parse_willmore(const json& j, WillmoreConfig& cfg) {
    reject_unknown(j, {"genus", "pretrain_epochs", "puncture_radius", "annulus_outer",
                       "gluing_max_weight", "gluing_order_weights", "gluing_batch",
                       "regularity_weight", "displacement"},
                   "willmore");
    cfg.genus = int(get_int(j, "genus", cfg.genus, "willmore"));
    cfg.pretrain_epochs = get_int(j, "pretrain_epochs", cfg.pretrain_epochs, "willmore");
    cfg.puncture_radius = get_num(j, "puncture_radius", cfg.puncture_radius, "willmore");
    cfg.annulus_outer = get_num(j, "annulus_outer", cfg.annulus_outer, "willmore");
    cfg.gluing_max_weight = get_num(j, "gluing_max_weight", cfg.gluing_max_weight, "willmore");
    if (j.contains("gluing_order_weights")) {
        const auto& w = j.at("gluing_order_weights");
        if (!w.is_array() || w.size() != 3)
            throw ConfigError(ConfigError::Kind::Range,
                              "willmore.gluing_order_weights must be an array of 3 numbers");
        for (int i = 0; i < 3; ++i)
            cfg.gluing_order_weights[std::size_t(i)] = w.at(std::size_t(i)).get<double>();
    }
    cfg.gluing_batch = int(get_int(j, "gluing_batch", cfg.gluing_batch, "willmore"));
    cfg.regularity_weight = get_num(j, "regularity_weight", cfg.regularity_weight, "willmore");
    cfg.displacement = get_num(j, "displacement", cfg.displacement, "willmore");
}

void parse_network(const json& j, NetworkConfig& cfg) {
    reject_unknown(j, {"hidden", "features", "fourier_order", "harmonic_degree"}, "network");
    if (j.contains("hidden")) {
        const auto& h = j.at("hidden");
        if (!h.is_array() || h.empty())
            throw ConfigError(ConfigError::Kind::Range,
                              "network.hidden must be a non-empty array");
        cfg.hidden.clear();
        for (const auto& w : h) cfg.hidden.push_back(w.get<int>());
    }
    cfg.features = get_str(j, "features", cfg.features, "network");
    if (cfg.features != "auto" && cfg.features != "identity" && cfg.features != "fourier" &&
        cfg.features != "harmonics")
        throw ConfigError(ConfigError::Kind::Range, "network.features must be one of "
                                                    "auto|identity|fourier|harmonics");
    cfg.fourier_order = int(get_int(j, "fourier_order", cfg.fourier_order, "network"));
    cfg.harmonic_degree = int(get_int(j, "harmonic_degree", cfg.harmonic_degree, "network"));
    if (cfg.fourier_order < 1 || cfg.harmonic_degree < 1 ||
        cfg.harmonic_degree > kMaxHarmonicDegree)
        throw ConfigError(ConfigError::Kind::Range, "network spectral orders out of range");
}

void parse_training(const json& j, TrainingConfig& cfg) {
    reject_unknown(j, {"epochs", "batch", "learning_rate", "beta1", "beta2", "eps",
                       "batches_per_epoch", "eval_batch", "eval_every", "checkpoint_every"},
                   "training");
    cfg.epochs = get_int(j, "epochs", cfg.epochs, "training");
    cfg.batch = int(get_int(j, "batch", cfg.batch, "training"));
    cfg.learning_rate = get_num(j, "learning_rate", cfg.learning_rate, "training");
    cfg.beta1 = get_num(j, "beta1", cfg.beta1, "training");
    cfg.beta2 = get_num(j, "beta2", cfg.beta2, "training");
    cfg.eps = get_num(j, "eps", cfg.eps, "training");
    cfg.batches_per_epoch = int(get_int(j, "batches_per_epoch", cfg.batches_per_epoch, "training"));
    cfg.eval_batch = int(get_int(j, "eval_batch", cfg.eval_batch, "training"));
    cfg.eval_every = get_int(j, "eval_every", cfg.eval_every, "training");
    cfg.checkpoint_every = get_int(j, "checkpoint_every", cfg.checkpoint_every, "training");
    if (cfg.epochs < 1 || cfg.batch < 1 || cfg.batches_per_epoch < 1 || cfg.eval_batch < 1 ||
        cfg.eval_every < 1)
        throw ConfigError(ConfigError::Kind::Range, "training sizes must be >= 1");
    if (!(cfg.learning_rate > 0.0))
        throw ConfigError(ConfigError::Kind::Range, "training.learning_rate must be > 0");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw ConfigError(ConfigError::Kind::Range, "training betas must be in [0,1)");
}

// Per-problem defaults; the spec-level knobs that differ between problems.
void apply_problem_defaults(ExperimentConfig& cfg, bool had_training_epochs,
                            bool had_training_batch, bool had_hidden) {
    if (cfg.problem == "einstein") {
        if (!had_training_epochs) cfg.training.epochs = 2000;
        if (!had_training_batch) cfg.training.batch = 1024;
        if (!had_hidden) cfg.network.hidden = {64, 64, 64};
    } else if (cfg.problem == "nirenberg") {
        if (!had_training_epochs) cfg.training.epochs = 5000;
        if (!had_training_batch) cfg.training.batch = 2048;
        if (!had_hidden) cfg.network.hidden = {64, 64, 64};
    } else if (cfg.problem == "willmore") {
        if (!had_training_epochs)
            cfg.training.epochs = cfg.willmore.pretrain_epochs + 2000;
        if (!had_training_batch) cfg.training.batch = 4096;
        if (!had_hidden) cfg.network.hidden = {128, 128, 128};
    }
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        syntax_error(origin, text, e.byte, e.what());
    }
    if (!root.is_object())
        throw ConfigError(ConfigError::Kind::Syntax, origin + ": config must be a JSON object");

    reject_unknown(root,
                   {"problem", "seed", "out_dir", "workers", "einstein", "nirenberg",
                    "willmore", "network", "training"},
                   "config");

    ExperimentConfig cfg;
    if (!root.contains("problem"))
        throw ConfigError(ConfigError::Kind::Range, "config requires a 'problem' key");
    cfg.problem = root.at("problem").get<std::string>();
    if (cfg.problem != "einstein" && cfg.problem != "nirenberg" && cfg.problem != "willmore")
        throw ConfigError(ConfigError::Kind::Range,
                          "problem must be einstein, nirenberg or willmore");

    // exactly one problem block, and it must match 'problem'
    for (const std::string block : {"einstein", "nirenberg", "willmore"})
        if (root.contains(block) && block != cfg.problem)
            throw ConfigError(ConfigError::Kind::Range,
                              "config declares problem '" + cfg.problem +
                                  "' but contains a '" + block + "' block");

    if (root.contains("seed")) {
        if (!root.at("seed").is_number_integer() || root.at("seed").get<long long>() < 0)
            throw ConfigError(ConfigError::Kind::Range, "seed must be a non-negative integer");
        cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    cfg.workers = int(get_int(root, "workers", cfg.workers, "config"));
    if (cfg.workers < 0)
        throw ConfigError(ConfigError::Kind::Range, "workers must be >= 0");
    cfg.out_dir = get_str(root, "out_dir", "runs/" + cfg.problem, "config");

    if (root.contains("einstein")) parse_einstein(root.at("einstein"), cfg.einstein);
    if (root.contains("nirenberg")) parse_nirenberg(root.at("nirenberg"), cfg.nirenberg);
    if (root.contains("willmore")) parse_willmore(root.at("willmore"), cfg.willmore);

    bool had_hidden = false, had_epochs = false, had_batch = false;
    if (root.contains("network")) {
        had_hidden = root.at("network").contains("hidden");
        parse_network(root.at("network"), cfg.network);
    }
    if (root.contains("training")) {
        had_epochs = root.at("training").contains("epochs");
        had_batch = root.at("training").contains("batch");
        parse_training(root.at("training"), cfg.training);
    }
    apply_problem_defaults(cfg, had_epochs, had_batch, had_hidden);

    // full validation of the assembled config
    if (cfg.problem == "einstein") cfg.einstein.validate();
    if (cfg.problem == "nirenberg") cfg.nirenberg.validate();
    if (cfg.problem == "willmore") {
        cfg.willmore.validate();
        if (cfg.willmore.pretrain_epochs >= cfg.training.epochs)
            throw ConfigError(ConfigError::Kind::Range,
                              "training.epochs must exceed willmore.pretrain_epochs");
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(ConfigError::Kind::MissingFile,
                          "config file '" + path.string() + "' not found");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json root;
    root["problem"] = cfg.problem;
    root["seed"] = cfg.seed;
    root["out_dir"] = cfg.out_dir;
    root["workers"] = cfg.workers;
    if (cfg.problem == "einstein") {
        json e;
        e["n"] = cfg.einstein.n;
        e["lambda"] = cfg.einstein.lambda;
        e["weights"] = cfg.einstein.weights;
        e["overlap_annulus"] = {cfg.einstein.r_lo, cfg.einstein.r_hi};
        e["sample_radius"] = cfg.einstein.sample_radius;
        e["batch_einstein"] = cfg.einstein.batch_einstein;
        e["batch_overlap"] = cfg.einstein.batch_overlap;
        e["supervised_mix"] = cfg.einstein.supervised_mix;
        root["einstein"] = e;
    } else if (cfg.problem == "nirenberg") {
        json n;
        json p;
        p["kind"] = cfg.nirenberg.prescriber.kind;
        p["constant"] = cfg.nirenberg.prescriber.constant;
        json terms = json::array();
        for (const auto& t : cfg.nirenberg.prescriber.terms)
            terms.push_back({{"l", t.ell}, {"m", t.m}, {"coeff", t.coeff}});
        p["terms"] = terms;
        n["prescriber"] = p;
        n["fit_degree"] = cfg.nirenberg.fit_degree;
        root["nirenberg"] = n;
    } else {
        json w;
        w["genus"] = cfg.willmore.genus;
        w["pretrain_epochs"] = cfg.willmore.pretrain_epochs;
        w["puncture_radius"] = cfg.willmore.puncture_radius;
        w["annulus_outer"] = cfg.willmore.annulus_outer;
        w["gluing_max_weight"] = cfg.willmore.gluing_max_weight;
        w["gluing_order_weights"] = cfg.willmore.gluing_order_weights;
        w["gluing_batch"] = cfg.willmore.gluing_batch;
        w["regularity_weight"] = cfg.willmore.regularity_weight;
        w["displacement"] = cfg.willmore.displacement;
        root["willmore"] = w;
    }
    json net;
    net["hidden"] = cfg.network.hidden;
    net["features"] = cfg.network.features;
    net["fourier_order"] = cfg.network.fourier_order;
    net["harmonic_degree"] = cfg.network.harmonic_degree;
    root["network"] = net;
    json tr;
    tr["epochs"] = cfg.training.epochs;
    tr["batch"] = cfg.training.batch;
    tr["learning_rate"] = cfg.training.learning_rate;
    tr["beta1"] = cfg.training.beta1;
    tr["beta2"] = cfg.training.beta2;
    tr["eps"] = cfg.training.eps;
    tr["batches_per_epoch"] = cfg.training.batches_per_epoch;
    tr["eval_batch"] = cfg.training.eval_batch;
    tr["eval_every"] = cfg.training.eval_every;
    tr["checkpoint_every"] = cfg.training.checkpoint_every;
    root["training"] = tr;
    return root.dump(2) + "\n";
}

std::unique_ptr<Problem> make_problem(const ExperimentConfig& cfg) {
    if (cfg.problem == "einstein") {
        EinsteinConfig e = cfg.einstein;
        switch (e.n) {
        case 2: return std::make_unique<EinsteinProblem<2>>(e, cfg.network, cfg.seed);
        case 3: return std::make_unique<EinsteinProblem<3>>(e, cfg.network, cfg.seed);
        case 4: return std::make_unique<EinsteinProblem<4>>(e, cfg.network, cfg.seed);
        case 5: return std::make_unique<EinsteinProblem<5>>(e, cfg.network, cfg.seed);
        default:
            throw ConfigError(ConfigError::Kind::Range, "einstein.n must be 2..5");
        }
    }
    if (cfg.problem == "nirenberg") {
        auto p = std::make_unique<NirenbergProblem>(cfg.nirenberg, cfg.network, cfg.seed);
        p->set_batch(cfg.training.batch);
        return p;
    }
    if (cfg.problem == "willmore") {
        auto p = std::make_unique<WillmoreProblem>(cfg.willmore, cfg.network, cfg.seed);
        p->set_batch(cfg.training.batch);
        p->set_total_epochs(cfg.training.epochs);
        return p;
    }
    throw ConfigError(ConfigError::Kind::Range, "unknown problem '" + cfg.problem + "'");
}

} // namespace geopinn
