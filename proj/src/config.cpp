#include "ogcil/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "ogcil/dataset.hpp"

namespace ogcil {

namespace {

const std::set<std::string> kRequired = {
    "dataset",        "knowns_per_task", "unknowns_per_task", "train_fraction", "val_fraction",
    "test_fraction",  "seeds",           "hidden_dim",        "embed_dim",      "lambda_reconst",
    "lambda_kd",      "pseudo_id",       "pseudo_ood",        "ood_interval",   "mix_beta",
    "exemplars_per_class", "exemplar_method", "epochs",       "learning_rate",
};
const std::set<std::string> kOptional = {"min_class_size", "pseudo_id_mode", "output_dir", "baseline", "ablation",
                                         "precision"};

const nlohmann::json& field(const nlohmann::json& j, const std::string& key) { return j.at(key); }

long long get_int(const nlohmann::json& j, const std::string& key, long long min) {
    const auto& v = field(j, key);
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    const auto x = v.get<long long>();
    if (x < min) throw ConfigError(key, "must be >= " + std::to_string(min));
    return x;
}

double get_double(const nlohmann::json& j, const std::string& key) {
    const auto& v = field(j, key);
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key, "must be finite");
    return x;
}

std::string get_string(const nlohmann::json& j, const std::string& key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw ConfigError(key, "expected a string");
    return v.get<std::string>();
}

std::vector<int> get_int_list(const nlohmann::json& j, const std::string& key, int min) {
    const auto& v = field(j, key);
    if (!v.is_array() || v.empty()) throw ConfigError(key, "expected a non-empty list of integers");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw ConfigError(key, "expected a non-empty list of integers");
        const auto x = e.get<long long>();
        if (x < min) throw ConfigError(key, "entries must be >= " + std::to_string(min));
        out.push_back(static_cast<int>(x));
    }
    return out;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kRequired.count(key) && !kOptional.count(key)) throw ConfigError(key, "unknown key");
    for (const auto& key : kRequired)
        if (!j.contains(key)) throw ConfigError(key, "required key missing");

    RunConfig c;
    c.dataset = get_string(j, "dataset");
    if (c.dataset.empty()) throw ConfigError("dataset", "must not be empty");
    if (j.contains("min_class_size")) c.min_class_size = static_cast<std::size_t>(get_int(j, "min_class_size", 0));

    c.layout.knowns_per_task = get_int_list(j, "knowns_per_task", 1);
    c.layout.unknowns_per_task = get_int_list(j, "unknowns_per_task", 1);
    if (c.layout.knowns_per_task.size() != c.layout.unknowns_per_task.size())
        throw ConfigError("unknowns_per_task", "must have one entry per task (same length as knowns_per_task)");
    c.layout.fractions.train = get_double(j, "train_fraction");
    c.layout.fractions.val = get_double(j, "val_fraction");
    c.layout.fractions.test = get_double(j, "test_fraction");
    for (const char* k : {"train_fraction", "val_fraction", "test_fraction"})
        if (!(get_double(j, k) > 0.0)) throw ConfigError(k, "must be > 0");
    try {
        c.layout.fractions.validate();
    } catch (const std::exception& e) {
        throw ConfigError("test_fraction", e.what());
    }

    {
        const auto& v = j.at("seeds");
        if (!v.is_array() || v.empty()) throw ConfigError("seeds", "expected a non-empty list of non-negative integers");
        for (const auto& e : v) {
            if (!e.is_number_integer() || (!e.is_number_unsigned() && e.get<long long>() < 0))
                throw ConfigError("seeds", "expected a non-empty list of non-negative integers");
            c.seeds.push_back(e.get<std::uint64_t>());
        }
    }

    auto& e = c.engine;
    e.hidden_dim = static_cast<int>(get_int(j, "hidden_dim", 1));
    e.embed_dim = static_cast<int>(get_int(j, "embed_dim", 1));
    e.weights.reconst = get_double(j, "lambda_reconst");
    if (e.weights.reconst < 0.0) throw ConfigError("lambda_reconst", "must be >= 0");
    e.weights.kd = get_double(j, "lambda_kd");
    if (e.weights.kd < 0.0) throw ConfigError("lambda_kd", "must be >= 0");
    e.mix.count_id = static_cast<int>(get_int(j, "pseudo_id", 0));
    e.mix.count_ood = static_cast<int>(get_int(j, "pseudo_ood", 0));
    e.mix.regen_interval = static_cast<int>(get_int(j, "ood_interval", 1));
    e.mix.beta = get_double(j, "mix_beta");
    if (!(e.mix.beta > 0.0)) throw ConfigError("mix_beta", "must be > 0");
    if (j.contains("pseudo_id_mode")) {
        const auto m = get_string(j, "pseudo_id_mode");
        if (m == "total") e.mix.id_mode = IdCountMode::total;
        else if (m == "per_class") e.mix.id_mode = IdCountMode::per_class;
        else throw ConfigError("pseudo_id_mode", "expected \"total\" or \"per_class\"");
    }
    e.exemplars_per_class = static_cast<int>(get_int(j, "exemplars_per_class", 0));
    try {
        e.exemplar_method = parse_exemplar_method(get_string(j, "exemplar_method"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError("exemplar_method", ex.what());
    }
    e.epochs = static_cast<int>(get_int(j, "epochs", 1));
    e.learning_rate = get_double(j, "learning_rate");
    if (!(e.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
    if (j.contains("ablation")) {
        const auto a = get_string(j, "ablation");
        try {
            e.ablation = parse_ablation(a);
        } catch (const std::exception& ex) {
            throw ConfigError("ablation", ex.what());
        }
    }
    if (j.contains("precision") && get_string(j, "precision") != "float64")
        throw ConfigError("precision", "only \"float64\" is supported");
    if (j.contains("output_dir")) c.output_dir = get_string(j, "output_dir");
    if (j.contains("baseline")) {
        if (!j.at("baseline").is_boolean()) throw ConfigError("baseline", "expected true or false");
        c.baseline = j.at("baseline").get<bool>();
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    RunConfig c = parse_run_config(j);
    if (c.dataset.is_relative()) c.dataset = path.parent_path() / c.dataset;
    return c;
}

nlohmann::json config_to_json(const EngineConfig& c) {
    return {
        {"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"hidden_dim", c.hidden_dim},
        {"embed_dim", c.embed_dim},
        {"lambda_reconst", c.weights.reconst},
        {"lambda_kd", c.weights.kd},
        {"pseudo_id", c.mix.count_id},
        {"pseudo_id_mode", c.mix.id_mode == IdCountMode::total ? "total" : "per_class"},
        {"pseudo_ood", c.mix.count_ood},
        {"ood_interval", c.mix.regen_interval},
        {"mix_beta", c.mix.beta},
        {"exemplars_per_class", c.exemplars_per_class},
        {"exemplar_method", to_string(c.exemplar_method)},
        {"seed", c.seed},
        {"ablation", to_string(c.ablation)},
        {"precision", "float64"},
    };
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j = config_to_json(c.engine);
    j.erase("seed");
    j["dataset"] = c.dataset.string();
    j["min_class_size"] = c.min_class_size;
    j["knowns_per_task"] = c.layout.knowns_per_task;
    j["unknowns_per_task"] = c.layout.unknowns_per_task;
    j["train_fraction"] = c.layout.fractions.train;
    j["val_fraction"] = c.layout.fractions.val;
    j["test_fraction"] = c.layout.fractions.test;
    j["seeds"] = c.seeds;
    j["baseline"] = c.baseline;
    if (!c.output_dir.empty()) j["output_dir"] = c.output_dir.string();
    return j;
}

EngineConfig engine_for_seed(const RunConfig& c, std::uint64_t seed) {
    EngineConfig e = c.engine;
    e.seed = seed;
    return e;
}

Graph load_graph(const RunConfig& c) {
    Graph g;
    if (c.dataset.extension() == ".npz") {
        g = load_npz_graph(c.dataset);
        if (c.min_class_size > 0) mask_small_classes(g, c.min_class_size);
    } else {
        g = load_dataset(DatasetPaths::in_directory(c.dataset), LoadOptions{c.min_class_size});
    }
    return g;
}

}  // namespace ogcil
