#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgesr/canny.hpp"
#include "edgesr/config.hpp"
#include "edgesr/gradsuite.hpp"
#include "edgesr/image.hpp"
#include "edgesr/metrics.hpp"
#include "edgesr/trainer.hpp"

namespace fs = std::filesystem;
using namespace edgesr;

namespace {

// 0 = success, 1 = usage error, 2 = data/runtime error
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

TrainConfig build_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = config::load_file(config_path);
    for (const std::string& kv : overrides) config::apply_override(cfg, kv);
    cfg.validate();
    return cfg;
}

// writes the training log to stdout and to <out>/train.log simultaneously
struct TeeBuf : std::streambuf {
    std::streambuf *a, *b;
    TeeBuf(std::streambuf* a, std::streambuf* b) : a(a), b(b) {}
    int overflow(int c) override {
        if (c != EOF) {
            a->sputc(static_cast<char>(c));
            b->sputc(static_cast<char>(c));
        }
        return c;
    }
};

int run_train(const TrainConfig& cfg, const std::string& data_dir, const std::string& out_dir,
              int stop_after) {
    fs::create_directories(out_dir);
    std::ofstream logfile(fs::path(out_dir) / "train.log");
    if (!logfile) {
        std::cerr << "error: cannot open train.log in " << out_dir << "\n";
        return kRuntime;
    }
    TeeBuf tee(std::cout.rdbuf(), logfile.rdbuf());
    std::ostream log(&tee);
    trainer::TrainResult r = trainer::train(cfg, data_dir, out_dir, log, stop_after);
    if (!r.final_checkpoint.empty())
        std::cout << "final checkpoint: " << r.final_checkpoint << "\n";
    else
        std::cout << "stopped early; resume state: " << r.state_path << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"edge-attention super-resolution: training, inference and evaluation"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, ckpt, in_path, sr_dir, hr_dir, csv_path;
    std::string variant, module, state_path, out_img;
    std::vector<std::string> overrides;
    int expect_scale = 0, stop_after = 0;
    float sigma = 1.f, low = 0.1f, high = 0.2f;
    int ksize = 5, seeds = 3;

    auto* train_cmd = app.add_subcommand("train", "train a model on an HR image directory");
    train_cmd->add_option("--config", config_path, "key = value configuration file");
    train_cmd->add_option("--data", data_dir, "directory of HR training images")->required();
    train_cmd->add_option("--out", out_dir, "output directory for checkpoints and logs")->required();
    train_cmd->add_option("--set", overrides, "override a config key (key=value), repeatable");
    train_cmd->add_option("--stop-after", stop_after,
                          "stop after this many epochs (for interruption testing)");

    auto* resume_cmd = app.add_subcommand("resume", "continue training from a saved state");
    resume_cmd->add_option("--state", state_path, "state.eatsr written by train")->required();
    resume_cmd->add_option("--data", data_dir, "directory of HR training images")->required();
    resume_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* sr_cmd = app.add_subcommand("sr", "super-resolve an image or directory");
    sr_cmd->add_option("--ckpt", ckpt, "generator checkpoint")->required();
    sr_cmd->add_option("--in", in_path, "input image or directory")->required();
    sr_cmd->add_option("--out", out_dir, "output directory")->required();
    sr_cmd->add_option("--scale", expect_scale, "expected scale; errors on checkpoint mismatch");

    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of paired result/reference directories");
    eval_cmd->add_option("--sr", sr_dir, "directory of super-resolved images")->required();
    eval_cmd->add_option("--hr", hr_dir, "directory of reference images")->required();
    eval_cmd->add_option("--csv", csv_path, "also write per-image results as CSV");

    auto* edges_cmd = app.add_subcommand("edges", "write the Canny edge map of an image");
    edges_cmd->add_option("--in", in_path, "input image")->required();
    edges_cmd->add_option("--out", out_img, "output image")->required();
    edges_cmd->add_option("--sigma", sigma, "Gaussian sigma");
    edges_cmd->add_option("--ksize", ksize, "Gaussian kernel size (odd)");
    edges_cmd->add_option("--low", low, "low threshold (fraction of max magnitude)");
    edges_cmd->add_option("--high", high, "high threshold (fraction of max magnitude)");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad_cmd->add_option("--module", module,
                         "one of: ops, nea, hybrid, generator, discriminator, loss (default all)");
    grad_cmd->add_option("--seeds", seeds, "random draws per check");

    auto* ablate_cmd = app.add_subcommand("ablate", "train an ablated variant");
    ablate_cmd
        ->add_option("--variant", variant,
                     "no_edge_attention | no_pixel | no_perceptual | no_adversarial")
        ->required();
    ablate_cmd->add_option("--config", config_path, "key = value configuration file");
    ablate_cmd->add_option("--data", data_dir, "directory of HR training images")->required();
    ablate_cmd->add_option("--out", out_dir, "output directory")->required();
    ablate_cmd->add_option("--set", overrides, "override a config key (key=value), repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*train_cmd) {
            TrainConfig cfg;
            try {
                cfg = build_config(config_path, overrides);
            } catch (const std::invalid_argument& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kUsage;
            }
            return run_train(cfg, data_dir, out_dir, stop_after);
        }
        if (*resume_cmd) {
            fs::create_directories(out_dir);
            std::ofstream logfile(fs::path(out_dir) / "train.log", std::ios::app);
            TeeBuf tee(std::cout.rdbuf(), logfile.rdbuf());
            std::ostream log(&tee);
            trainer::TrainResult r = trainer::resume(state_path, data_dir, out_dir, log);
            std::cout << "final checkpoint: " << r.final_checkpoint << "\n";
            return kOk;
        }
        if (*sr_cmd) {
            trainer::super_resolve(ckpt, in_path, out_dir, expect_scale);
            return kOk;
        }
        if (*eval_cmd) {
            MetricReport r = metrics::evaluate_dir(sr_dir, hr_dir);
            std::cout << metrics::format_report(r);
            if (!csv_path.empty()) metrics::write_csv(r, csv_path);
            return r.errors.empty() ? kOk : kRuntime;
        }
        if (*edges_cmd) {
            CannyParams p;
            p.sigma = sigma;
            p.ksize = ksize;
            p.low = low;
            p.high = high;
            const Image img = imageio::load_image(in_path);
            imageio::save_image(canny::to_image(canny::detect(img, p)), out_img);
            return kOk;
        }
        if (*grad_cmd) {
            std::vector<gradsuite::Entry> entries;
            try {
                entries = gradsuite::run(module, seeds);
            } catch (const std::invalid_argument& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kUsage;
            }
            bool all_pass = true;
            for (const auto& e : entries) {
                std::cout << (e.report.pass ? "PASS " : "FAIL ") << e.name << "  checked "
                          << e.report.checked << "  max_abs " << e.report.max_abs;
                if (e.report.skipped > 0) std::cout << "  skipped " << e.report.skipped;
                if (!e.report.pass) std::cout << "  worst: " << e.report.worst;
                std::cout << "\n";
                all_pass = all_pass && e.report.pass;
            }
            return all_pass ? kOk : kRuntime;
        }
        if (*ablate_cmd) {
            TrainConfig cfg;
            try {
                cfg = trainer::apply_variant(build_config(config_path, overrides), variant);
            } catch (const std::invalid_argument& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kUsage;
            }
            return run_train(cfg, data_dir, out_dir, 0);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
