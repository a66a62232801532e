#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "edgesr/canny.hpp"
#include "edgesr/config.hpp"
#include "edgesr/network.hpp"
#include "edgesr/objective.hpp"

namespace edgesr {

class Adam {
public:
    Adam(std::vector<Tensor> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
         float eps = 1e-8f);

    // Applies one update from the currently accumulated gradients; parameters
    // whose gradient was never touched this step decay their moments with g=0.
    void step();

    std::int64_t t() const { return t_; }
    void set_t(std::int64_t t) { t_ = t; }
    float lr() const { return lr_; }
    void set_lr(float lr) { lr_ = lr; }
    const std::vector<Tensor>& m() const { return m_; }
    const std::vector<Tensor>& v() const { return v_; }
    std::vector<Tensor>& m() { return m_; }
    std::vector<Tensor>& v() { return v_; }

private:
    std::vector<Tensor> params_, m_, v_;
    float lr_, b1_, b2_, eps_;
    std::int64_t t_ = 0;
};

namespace trainer {

CannyParams canny_params(const TrainConfig& cfg);

struct TrainResult {
    std::string final_checkpoint;  // generator checkpoint (with meta)
    std::string state_path;        // full resume state
    long steps = 0;
    double first_pixel_loss = 0.0;  // first and last logged pixel losses,
    double last_pixel_loss = 0.0;   // for quick convergence checks
};

// Two-stage loop: epochs_pretrain with lambda_adv = 0, then epochs_full with
// the adversarial term active (one discriminator step, then one generator
// step per batch). Writes a checkpoint and resume state every epoch.
// stop_after_epochs > 0 interrupts the run once that many epochs are done
// (simulating a killed job); the final checkpoint is only written when the
// configured schedule actually completes.
TrainResult train(const TrainConfig& cfg, const std::string& hr_dir, const std::string& out_dir,
                  std::ostream& log, int stop_after_epochs = 0);

// Continues a run from its serialized state; a completed run is a no-op.
TrainResult resume(const std::string& state_path, const std::string& hr_dir,
                   const std::string& out_dir, std::ostream& log, int stop_after_epochs = 0);

// variant: no_edge_attention | no_pixel | no_perceptual | no_adversarial
TrainConfig apply_variant(TrainConfig cfg, const std::string& variant);

// Runs the generator from a checkpoint on one image or a directory of images,
// writing <stem>.png into out_dir. expect_scale != 0 enforces a match with
// the checkpoint's recorded scale.
void super_resolve(const std::string& ckpt_path, const std::string& input_path,
                   const std::string& out_dir, int expect_scale = 0);

// Checkpoint plumbing shared with tests: generator parameters prefixed "g."
// plus a "meta" tensor recording architecture and canny parameters.
void save_generator_checkpoint(const std::string& path, const Generator& gen,
                               const TrainConfig& cfg);
std::unique_ptr<Generator> load_generator_checkpoint(const std::string& path,
                                                     CannyParams* canny_out = nullptr);

}  // namespace trainer
}  // namespace edgesr
