#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace edgesr {

// Everything the training loop needs; defaults reproduce the published
// schedule (20 pretrain + 80 adversarial epochs, lambda_perc = 1e-4,
// lambda_adv = 1e-3).
struct TrainConfig {
    int scale = 4;
    int patch_lr = 32;
    int batch_size = 8;
    int epochs_pretrain = 20;
    int epochs_full = 80;
    int patches_per_epoch = 800;

    float lambda_pix = 1.f;
    float lambda_perc_pre = 1e-4f;
    float lambda_perc_full = 1e-4f;
    float lambda_adv_full = 1e-3f;
    float label_smoothing = 0.f;  // real-target becomes 1 - this
    std::uint64_t perceptual_seed = 7;

    std::string optimizer = "adam";
    float lr = 1e-4f;
    float lr_decay = 1.f;  // per-epoch multiplicative factor, (0, 1]
    float beta1 = 0.9f;
    float beta2 = 0.999f;

    std::uint64_t seed = 42;

    int blocks = 8;         // B
    int channels = 64;      // C
    int edge_channels = 32; // Ce
    int disc_base_channels = 64;
    int disc_stages = 4;

    float canny_sigma = 1.f;
    int canny_ksize = 5;
    float canny_low = 0.1f;
    float canny_high = 0.2f;

    bool use_edge_attention = true;
    bool use_pixel_loss = true;
    bool use_perceptual_loss = true;
    bool use_adversarial_loss = true;

    void validate() const;  // throws std::invalid_argument on bad values
};

namespace config {

// Plain-text `key = value` file with dotted keys (`loss.lambda_adv_full = 1e-3`).
// '#' starts a comment; blank lines ignored. Unknown keys are errors.
TrainConfig load_file(const std::string& path);
TrainConfig parse(const std::string& text);

// Applies a single "key=value" override (CLI flags win over the file).
void apply_override(TrainConfig& cfg, const std::string& key_value);
void set_key(TrainConfig& cfg, const std::string& key, const std::string& value);

// All recognized keys, for diagnostics.
std::vector<std::string> known_keys();

}  // namespace config
}  // namespace edgesr
