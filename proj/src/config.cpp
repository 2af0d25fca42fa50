#include "vidbias/config.hpp"

#include <fstream>

namespace vidbias {

namespace {

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"w_adv", w.w_adv},
                       {"w_ent", w.w_ent},
                       {"w_gp", w.w_gp},
                       {"frame_strategy", frame_strategy_to_string(w.frame_strategy)}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    j.at("w_adv").get_to(w.w_adv);
    j.at("w_ent").get_to(w.w_ent);
    j.at("w_gp").get_to(w.w_gp);
    w.frame_strategy = frame_strategy_from_string(j.at("frame_strategy").get<std::string>());
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    nlohmann::json weights;
    to_json(weights, c.weights);
    j = nlohmann::json{{"base_lr", c.base_lr},
                       {"batch_size", c.batch_size},
                       {"epochs", c.epochs},
                       {"warmup_epochs", c.warmup_epochs},
                       {"weight_decay", c.weight_decay},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"weights", weights},
                       {"random_resized_crop", c.random_resized_crop},
                       {"horizontal_flip", c.horizontal_flip}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("base_lr").get_to(c.base_lr);
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs").get_to(c.epochs);
    j.at("warmup_epochs").get_to(c.warmup_epochs);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    from_json(j.at("weights"), c.weights);
    j.at("random_resized_crop").get_to(c.random_resized_crop);
    j.at("horizontal_flip").get_to(c.horizontal_flip);
}

void check_known_keys(const nlohmann::json& user, const nlohmann::json& canonical,
                      const std::string& prefix) {
    if (!user.is_object()) return;
    for (const auto& [key, value] : user.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!canonical.contains(key)) throw ConfigError("unknown config key: " + path);
        if (value.is_object()) check_known_keys(value, canonical.at(key), path);
    }
}

void merge_into(nlohmann::json& base, const nlohmann::json& user) {
    for (const auto& [key, value] : user.items()) {
        if (value.is_object() && base.contains(key) && base.at(key).is_object())
            merge_into(base.at(key), value);
        else
            base[key] = value;
    }
}

}  // namespace

void ExperimentConfig::resolve() {
    data.seed = derive_seed(seed, "data", 0);
    train.seed = derive_seed(seed, "train", 0);
    encoder.init_seed = derive_seed(seed, "init", 0);
    encoder.n_classes = data.n_classes;
    encoder.clip_t = data.clip_len;
    encoder.clip_h = data.height;
    encoder.clip_w = data.width;
    encoder.clip_c = 3;
}

void ExperimentConfig::validate() const {
    data.validate();
    encoder.validate();
    train.validate();
    if (n_train_per_class <= 0 || n_test_per_class <= 0)
        throw ConfigError("config: per-class clip counts must be positive");
    if (val_fraction <= 0 || val_fraction >= 1) throw ConfigError("config: val_fraction outside (0,1)");
    if (k_backgrounds <= 0) throw ConfigError("config: k_backgrounds must be positive");
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json train_j;
    to_json(train_j, cfg.train);
    nlohmann::json j;
    j["data"] = cfg.data;
    j["data"]["n_train_per_class"] = cfg.n_train_per_class;
    j["data"]["n_test_per_class"] = cfg.n_test_per_class;
    j["data"]["val_fraction"] = cfg.val_fraction;
    j["data"].erase("seed");  // sub-seeds derive from the global seed
    j["bench"] = {{"k_backgrounds", cfg.k_backgrounds}};
    j["encoder"] = {{"channels", cfg.encoder.channels},
                    {"strides", cfg.encoder.strides},
                    {"norm_groups", cfg.encoder.norm_groups}};
    j["train"] = train_j;
    j["out_root"] = cfg.out_root;
    j["tag"] = cfg.tag;
    j["seed"] = cfg.seed;
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& user) {
    ExperimentConfig cfg;
    nlohmann::json full = config_to_json(cfg);
    try {
        check_known_keys(user, full, "");
        merge_into(full, user);

        const auto& d = full.at("data");
        cfg.data.n_classes = d.at("n_classes").get<int>();
        cfg.data.n_bg_cues = d.at("n_bg_cues").get<int>();
        cfg.data.n_fg_cues = d.at("n_fg_cues").get<int>();
        cfg.data.rho_bg = d.at("rho_bg").get<double>();
        cfg.data.rho_fg = d.at("rho_fg").get<double>();
        cfg.data.clip_len = d.at("clip_len").get<int>();
        cfg.data.height = d.at("height").get<int>();
        cfg.data.width = d.at("width").get<int>();
        cfg.n_train_per_class = d.at("n_train_per_class").get<int>();
        cfg.n_test_per_class = d.at("n_test_per_class").get<int>();
        cfg.val_fraction = d.at("val_fraction").get<double>();
        cfg.k_backgrounds = full.at("bench").at("k_backgrounds").get<int>();
        const auto& e = full.at("encoder");
        e.at("channels").get_to(cfg.encoder.channels);
        e.at("strides").get_to(cfg.encoder.strides);
        e.at("norm_groups").get_to(cfg.encoder.norm_groups);
        from_json(full.at("train"), cfg.train);
        full.at("out_root").get_to(cfg.out_root);
        full.at("tag").get_to(cfg.tag);
        full.at("seed").get_to(cfg.seed);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    cfg.resolve();
    try {
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid json: " + e.what());
    }
    return config_from_json(j);
}

void apply_override(nlohmann::json& j, const std::string& keyval) {
    const auto eq = keyval.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like section.key=value: " + keyval);
    const std::string path = keyval.substr(0, eq);
    const std::string raw = keyval.substr(eq + 1);

    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (...) {
        value = raw;  // plain string
    }

    nlohmann::json* cursor = &j;
    size_t start = 0;
    while (true) {
        const auto dotpos = path.find('.', start);
        const std::string key = path.substr(start, dotpos == std::string::npos ? std::string::npos
                                                                               : dotpos - start);
        if (key.empty()) throw ConfigError("bad override path: " + path);
        if (dotpos == std::string::npos) {
            (*cursor)[key] = value;
            break;
        }
        cursor = &(*cursor)[key];
        start = dotpos + 1;
    }
}

}  // namespace vidbias
