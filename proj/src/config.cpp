#include "edgesr/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace edgesr {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (scale != 2 && scale != 3 && scale != 4) fail("scale must be 2, 3 or 4");
    if (patch_lr < 8) fail("patch_lr must be >= 8");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs_pretrain < 0 || epochs_full < 0) fail("epochs must be >= 0");
    if (patches_per_epoch < 1) fail("patches_per_epoch must be >= 1");
    if (lambda_pix < 0 || lambda_perc_pre < 0 || lambda_perc_full < 0 || lambda_adv_full < 0)
        fail("loss weights must be >= 0");
    if (label_smoothing < 0 || label_smoothing >= 0.5f) fail("label_smoothing must be in [0, 0.5)");
    if (optimizer != "adam") fail("unknown optimizer '" + optimizer + "' (only adam is available)");
    if (lr <= 0) fail("learning rate must be > 0");
    if (lr_decay <= 0 || lr_decay > 1) fail("opt.lr_decay must be in (0, 1]");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) fail("betas must be in [0,1)");
    if (blocks < 1 || channels < 1 || edge_channels < 1) fail("architecture sizes must be >= 1");
    if (disc_base_channels < 1 || disc_stages < 1) fail("discriminator sizes must be >= 1");
    if (canny_sigma <= 0) fail("canny.sigma must be > 0");
    if (canny_ksize < 3 || canny_ksize % 2 == 0) fail("canny.ksize must be odd and >= 3");
    if (canny_low < 0 || canny_low >= canny_high) fail("canny thresholds need 0 <= low < high");
}

namespace config {

namespace {

struct Setter {
    std::function<void(TrainConfig&, const std::string&)> apply;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T v{};
    is >> v;
    if (is.fail()) throw std::invalid_argument("config: bad value '" + value + "' for " + key);
    char c;
    if (is >> c) throw std::invalid_argument("config: trailing junk in '" + value + "' for " + key);
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw std::invalid_argument("config: bad boolean '" + value + "' for " + key);
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto num = [&t](const std::string& key, auto member) {
            t[key].apply = [key, member](TrainConfig& c, const std::string& v) {
                c.*member = parse_number<std::decay_t<decltype(c.*member)>>(key, v);
            };
        };
        auto boolean = [&t](const std::string& key, bool TrainConfig::* member) {
            t[key].apply = [key, member](TrainConfig& c, const std::string& v) {
                c.*member = parse_bool(key, v);
            };
        };
        num("scale", &TrainConfig::scale);
        num("patch_lr", &TrainConfig::patch_lr);
        num("batch_size", &TrainConfig::batch_size);
        num("epochs_pretrain", &TrainConfig::epochs_pretrain);
        num("epochs_full", &TrainConfig::epochs_full);
        num("patches_per_epoch", &TrainConfig::patches_per_epoch);
        num("seed", &TrainConfig::seed);
        num("loss.lambda_pix", &TrainConfig::lambda_pix);
        num("loss.lambda_perc_pre", &TrainConfig::lambda_perc_pre);
        num("loss.lambda_perc_full", &TrainConfig::lambda_perc_full);
        num("loss.lambda_adv_full", &TrainConfig::lambda_adv_full);
        num("loss.label_smoothing", &TrainConfig::label_smoothing);
        num("loss.perceptual_seed", &TrainConfig::perceptual_seed);
        t["loss.preset"].apply = [](TrainConfig& c, const std::string& v) {
            // two published weight sets: the staged schedule (1e-4 / 1e-3)
            // and the flat alternative (0.001 / 0.01)
            if (v == "schedule") {
                c.lambda_perc_pre = c.lambda_perc_full = 1e-4f;
                c.lambda_adv_full = 1e-3f;
            } else if (v == "flat") {
                c.lambda_perc_pre = c.lambda_perc_full = 0.001f;
                c.lambda_adv_full = 0.01f;
            } else {
                throw std::invalid_argument("config: loss.preset must be 'schedule' or 'flat', got '" +
                                            v + "'");
            }
        };
        t["opt.kind"].apply = [](TrainConfig& c, const std::string& v) { c.optimizer = v; };
        num("opt.lr", &TrainConfig::lr);
        num("opt.lr_decay", &TrainConfig::lr_decay);
        num("opt.beta1", &TrainConfig::beta1);
        num("opt.beta2", &TrainConfig::beta2);
        num("arch.blocks", &TrainConfig::blocks);
        num("arch.channels", &TrainConfig::channels);
        num("arch.edge_channels", &TrainConfig::edge_channels);
        num("arch.disc_base_channels", &TrainConfig::disc_base_channels);
        num("arch.disc_stages", &TrainConfig::disc_stages);
        num("canny.sigma", &TrainConfig::canny_sigma);
        num("canny.ksize", &TrainConfig::canny_ksize);
        num("canny.low", &TrainConfig::canny_low);
        num("canny.high", &TrainConfig::canny_high);
        boolean("ablate.use_edge_attention", &TrainConfig::use_edge_attention);
        boolean("ablate.use_pixel_loss", &TrainConfig::use_pixel_loss);
        boolean("ablate.use_perceptual_loss", &TrainConfig::use_perceptual_loss);
        boolean("ablate.use_adversarial_loss", &TrainConfig::use_adversarial_loss);
        return t;
    }();
    return table;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void set_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second.apply(cfg, value);
}

void apply_override(TrainConfig& cfg, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config: override must be key=value, got '" + key_value + "'");
    set_key(cfg, trim(key_value.substr(0, eq)), trim(key_value.substr(eq + 1)));
}

TrainConfig parse(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key = value: '" + line + "'");
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

TrainConfig load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str());
}

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, s] : setters()) keys.push_back(k);
    return keys;
}

}  // namespace config
}  // namespace edgesr
