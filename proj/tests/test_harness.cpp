#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "edgesr/config.hpp"
#include "edgesr/image.hpp"
#include "edgesr/ops.hpp"
#include "edgesr/rng.hpp"
#include "edgesr/trainer.hpp"

using namespace edgesr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("edgesr_harness_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// small synthetic corpus with strong edges: tilted gradient plus rectangles
void write_corpus(const fs::path& dir, int count, int side, std::uint64_t seed) {
    fs::create_directories(dir);
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Image img(side, side);
        const float gx = rng.uniform(0.f, 3.f), gy = rng.uniform(0.f, 3.f);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = std::fmin(255.f, 40.f + gx * x + gy * y + 20.f * c);
        for (int r = 0; r < 3; ++r) {
            const int x0 = rng.uniform_int(side - 8), y0 = rng.uniform_int(side - 8);
            const int w = 4 + rng.uniform_int(4), h = 4 + rng.uniform_int(4);
            const float v = static_cast<float>(rng.uniform_int(256));
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x)
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
        }
        char name[32];
        std::snprintf(name, sizeof name, "img_%03d.png", i);
        imageio::save_image(img, (dir / name).string());
    }
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.scale = 2;
    c.patch_lr = 8;
    c.batch_size = 4;
    c.epochs_pretrain = 1;
    c.epochs_full = 1;
    c.patches_per_epoch = 8;
    c.blocks = 1;
    c.channels = 6;
    c.edge_channels = 4;
    c.disc_base_channels = 6;
    c.disc_stages = 1;
    c.canny_ksize = 3;
    c.lr = 1e-3f;
    return c;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("config: defaults reproduce the published schedule") {
    TrainConfig c;
    CHECK(c.scale == 4);
    CHECK(c.epochs_pretrain == 20);
    CHECK(c.epochs_full == 80);
    CHECK(c.lambda_pix == 1.f);
    CHECK(c.lambda_perc_full == doctest::Approx(1e-4));
    CHECK(c.lambda_adv_full == doctest::Approx(1e-3));
    CHECK(c.blocks == 8);
    CHECK(c.channels == 64);
    CHECK(c.edge_channels == 32);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config: parsing, comments, presets and overrides") {
    TrainConfig c = config::parse(
        "# a comment\n"
        "scale = 2\n"
        "loss.lambda_adv_full = 0.05   # trailing comment\n"
        "arch.blocks = 3\n"
        "ablate.use_perceptual_loss = off\n"
        "\n"
        "opt.lr = 2e-4\n");
    CHECK(c.scale == 2);
    CHECK(c.lambda_adv_full == doctest::Approx(0.05));
    CHECK(c.blocks == 3);
    CHECK_FALSE(c.use_perceptual_loss);
    CHECK(c.lr == doctest::Approx(2e-4));

    TrainConfig decayed = config::parse("opt.lr_decay = 0.97\n");
    CHECK(decayed.lr_decay == doctest::Approx(0.97));

    TrainConfig flat = config::parse("loss.preset = flat\n");
    CHECK(flat.lambda_perc_full == doctest::Approx(0.001));
    CHECK(flat.lambda_adv_full == doctest::Approx(0.01));
    TrainConfig sched = config::parse("loss.preset = schedule\n");
    CHECK(sched.lambda_perc_full == doctest::Approx(1e-4));
    CHECK(sched.lambda_adv_full == doctest::Approx(1e-3));

    config::apply_override(c, "seed=99");
    CHECK(c.seed == 99);

    CHECK_THROWS_AS(config::parse("no_such_key = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(config::parse("scale\n"), std::invalid_argument);
    CHECK_THROWS_AS(config::parse("scale = banana\n"), std::invalid_argument);
    CHECK_THROWS_AS(config::parse("scale = 2x\n"), std::invalid_argument);
    CHECK_THROWS_AS(config::apply_override(c, "just_a_key"), std::invalid_argument);
    CHECK_FALSE(config::known_keys().empty());
}

TEST_CASE("config: validation rejects out-of-range values") {
    auto broken = [](auto&& tweak) {
        TrainConfig c;
        tweak(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    broken([](TrainConfig& c) { c.scale = 5; });
    broken([](TrainConfig& c) { c.patch_lr = 4; });
    broken([](TrainConfig& c) { c.batch_size = 0; });
    broken([](TrainConfig& c) { c.lambda_adv_full = -1.f; });
    broken([](TrainConfig& c) { c.label_smoothing = 0.5f; });
    broken([](TrainConfig& c) { c.optimizer = "sgd"; });
    broken([](TrainConfig& c) { c.lr = 0.f; });
    broken([](TrainConfig& c) { c.lr_decay = 0.f; });
    broken([](TrainConfig& c) { c.lr_decay = 1.5f; });
    broken([](TrainConfig& c) { c.beta1 = 1.f; });
    broken([](TrainConfig& c) { c.canny_ksize = 4; });
    broken([](TrainConfig& c) { c.canny_low = 0.3f; });
}

TEST_CASE("adam: first-step magnitude and convergence on a quadratic") {
    Tensor x({1}, 0.f, /*requires_grad=*/true);
    Tensor target({1}, 3.f);
    Adam opt({x}, /*lr=*/0.05f);
    auto iterate = [&] {
        x.zero_grad();
        tape::clear();
        backward(ops::mse_mean(x, target));
        opt.step();
    };
    iterate();
    // bias-corrected first step is lr * g / (|g| + eps), i.e. one lr toward 3
    CHECK(x.data()[0] == doctest::Approx(0.05).epsilon(1e-4));
    for (int i = 0; i < 400; ++i) iterate();
    CHECK(x.data()[0] == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("adam: parameters without gradients stay put") {
    Tensor a({2}, 1.f, true), b({2}, 1.f, true);
    Adam opt({a, b}, 0.1f);
    a.zero_grad();
    tape::clear();
    backward(ops::mse_mean(a, Tensor({2}, 0.f)));
    opt.step();
    CHECK(a.data()[0] != 1.f);
    CHECK(b.data()[0] == 1.f);
    CHECK(b.data()[1] == 1.f);
}

TEST_CASE("train: zero-epoch schedule still emits initial checkpoint, state and final") {
    TempDir data("zero_data"), out("zero_out");
    write_corpus(data.path, 2, 40, 1);
    TrainConfig cfg = tiny_config();
    cfg.epochs_pretrain = 0;
    cfg.epochs_full = 0;
    std::ostringstream log;
    trainer::TrainResult r = trainer::train(cfg, data.str(), out.str(), log);
    CHECK(r.steps == 0);
    CHECK(fs::exists(out.path / "ckpt_epoch_0000.eatsr"));
    CHECK(fs::exists(out.path / "state.eatsr"));
    CHECK(fs::exists(out.path / "final.eatsr"));
    CHECK(trainer::load_generator_checkpoint(r.final_checkpoint) != nullptr);
}

TEST_CASE("train: identical seeds give byte-identical final checkpoints") {
    TempDir data("det_data"), out_a("det_a"), out_b("det_b");
    write_corpus(data.path, 3, 40, 2);
    TrainConfig cfg = tiny_config();
    std::ostringstream la, lb;
    trainer::TrainResult a = trainer::train(cfg, data.str(), out_a.str(), la);
    trainer::TrainResult b = trainer::train(cfg, data.str(), out_b.str(), lb);
    CHECK(file_bytes(a.final_checkpoint) == file_bytes(b.final_checkpoint));
    CHECK(la.str() == lb.str());

    cfg.seed = 1234;
    TempDir out_c("det_c");
    std::ostringstream lc;
    trainer::TrainResult c = trainer::train(cfg, data.str(), out_c.str(), lc);
    CHECK(file_bytes(a.final_checkpoint) != file_bytes(c.final_checkpoint));
}

TEST_CASE("train: interrupted run resumed from state matches the straight run exactly") {
    TempDir data("res_data"), out_a("res_a"), out_b("res_b");
    write_corpus(data.path, 3, 40, 3);
    TrainConfig cfg = tiny_config();
    cfg.epochs_pretrain = 2;
    cfg.epochs_full = 1;

    std::ostringstream la;
    trainer::TrainResult straight = trainer::train(cfg, data.str(), out_a.str(), la);
    REQUIRE_FALSE(straight.final_checkpoint.empty());

    std::ostringstream lb1, lb2;
    trainer::TrainResult partial =
        trainer::train(cfg, data.str(), out_b.str(), lb1, /*stop_after_epochs=*/2);
    CHECK(partial.final_checkpoint.empty());  // schedule not finished yet
    trainer::TrainResult resumed = trainer::resume(partial.state_path, data.str(), out_b.str(), lb2);
    REQUIRE_FALSE(resumed.final_checkpoint.empty());

    CHECK(file_bytes(straight.final_checkpoint) == file_bytes(resumed.final_checkpoint));
    CHECK(la.str() == lb1.str() + lb2.str());
    CHECK(resumed.steps == straight.steps);

    // resuming a completed run is a no-op that rewrites the same final file
    std::ostringstream lb3;
    trainer::TrainResult again = trainer::resume(resumed.state_path, data.str(), out_b.str(), lb3);
    CHECK(again.steps == resumed.steps);
    CHECK(lb3.str().empty());
}

TEST_CASE("resume: corrupt or alien state files are diagnosed, not trained on") {
    TempDir data("bad_data"), out("bad_out");
    write_corpus(data.path, 2, 40, 4);
    std::ostringstream log;

    const fs::path garbage = out.path / "garbage.eatsr";
    {
        std::ofstream f(garbage, std::ios::binary);
        f << "PK\x03\x04 definitely not ours";
    }
    CHECK_THROWS_WITH_AS(trainer::resume(garbage.string(), data.str(), out.str(), log),
                         doctest::Contains("bad magic"), std::runtime_error);

    TrainConfig cfg = tiny_config();
    cfg.epochs_pretrain = 1;
    cfg.epochs_full = 0;
    trainer::TrainResult r = trainer::train(cfg, data.str(), out.str(), log);
    fs::resize_file(r.state_path, fs::file_size(r.state_path) * 2 / 3);
    CHECK_THROWS_WITH_AS(trainer::resume(r.state_path, data.str(), out.str(), log),
                         doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("train: pixel-only run reduces the training loss on a tiny corpus") {
    TempDir data("fit_data"), out("fit_out");
    write_corpus(data.path, 2, 40, 5);
    TrainConfig cfg = tiny_config();
    cfg.use_perceptual_loss = false;
    cfg.use_adversarial_loss = false;
    cfg.epochs_pretrain = 6;
    cfg.epochs_full = 0;
    cfg.patches_per_epoch = 16;
    std::ostringstream log;
    trainer::TrainResult r = trainer::train(cfg, data.str(), out.str(), log);
    CHECK(r.steps == 6 * 16 / cfg.batch_size);
    CHECK(r.last_pixel_loss < r.first_pixel_loss);
}

TEST_CASE("ablate: variants flip exactly their flag, unknown names are rejected") {
    TrainConfig base = tiny_config();
    CHECK_FALSE(trainer::apply_variant(base, "no_edge_attention").use_edge_attention);
    CHECK_FALSE(trainer::apply_variant(base, "no_pixel").use_pixel_loss);
    CHECK_FALSE(trainer::apply_variant(base, "no_perceptual").use_perceptual_loss);
    CHECK_FALSE(trainer::apply_variant(base, "no_adversarial").use_adversarial_loss);
    TrainConfig full = trainer::apply_variant(base, "full");
    CHECK(full.use_edge_attention);
    CHECK(full.use_pixel_loss);
    CHECK_THROWS_AS(trainer::apply_variant(base, "no_such_thing"), std::invalid_argument);
}

TEST_CASE("ablate: no_adversarial training carries no discriminator in its state") {
    TempDir data("abl_data"), out_a("abl_a"), out_b("abl_b");
    write_corpus(data.path, 2, 40, 6);
    TrainConfig cfg = tiny_config();
    cfg.epochs_pretrain = 0;
    cfg.epochs_full = 1;
    std::ostringstream log;

    trainer::TrainResult with_d = trainer::train(cfg, data.str(), out_a.str(), log);
    bool saw_disc = false;
    for (const auto& [name, t] : load_checkpoint(with_d.state_path))
        saw_disc = saw_disc || name.rfind("d.", 0) == 0;
    CHECK(saw_disc);

    trainer::TrainResult without_d =
        trainer::train(trainer::apply_variant(cfg, "no_adversarial"), data.str(), out_b.str(), log);
    for (const auto& [name, t] : load_checkpoint(without_d.state_path)) {
        CHECK(name.rfind("d.", 0) != 0);
        CHECK(name.rfind("opt.d.", 0) != 0);
    }
}

TEST_CASE("train: stage transition is visible in the log with the right weights") {
    TempDir data("log_data"), out("log_out");
    write_corpus(data.path, 2, 40, 7);
    TrainConfig cfg = tiny_config();
    std::ostringstream log;
    trainer::train(cfg, data.str(), out.str(), log);
    const std::string text = log.str();
    CHECK(text.find("# epoch 0 stage pretrain") != std::string::npos);
    CHECK(text.find("lambda_adv 0\n") != std::string::npos);
    CHECK(text.find("# epoch 1 stage full") != std::string::npos);
    CHECK(text.find("lambda_adv 0.001") != std::string::npos);
    // the tee'd copy on disk matches what the caller saw
    std::ifstream in(out.path / "train.log");
    CHECK_FALSE(in.good());  // train() itself does not write train.log; the CLI tees it
}

TEST_CASE("super_resolve: upscales by the checkpoint scale and rejects mismatches") {
    TempDir data("sr_data"), out("sr_out"), result("sr_result");
    write_corpus(data.path, 2, 40, 8);
    TrainConfig cfg = tiny_config();
    cfg.epochs_pretrain = 0;
    cfg.epochs_full = 0;
    std::ostringstream log;
    trainer::TrainResult r = trainer::train(cfg, data.str(), out.str(), log);

    Image small(10, 12);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x)
            for (int c = 0; c < 3; ++c) small.at(y, x, c) = static_cast<float>(10 * x + c);
    const fs::path in_png = out.path / "input.png";
    imageio::save_image(small, in_png.string());

    trainer::super_resolve(r.final_checkpoint, in_png.string(), result.str());
    const Image sr = imageio::load_image((result.path / "input.png").string());
    CHECK(sr.height == 20);
    CHECK(sr.width == 24);

    CHECK_THROWS_WITH_AS(
        trainer::super_resolve(r.final_checkpoint, in_png.string(), result.str(), 4),
        doctest::Contains("requested scale 4"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        trainer::super_resolve(r.final_checkpoint, in_png.string(), result.str(), 4),
        doctest::Contains("scale 2"), std::runtime_error);
}

TEST_CASE("train: unusable corpora fail fast with a clear message") {
    TempDir data("small_data"), out("small_out"), empty("empty_data");
    write_corpus(data.path, 2, 12, 9);  // smaller than one HR patch
    TrainConfig cfg = tiny_config();
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(trainer::train(cfg, data.str(), out.str(), log),
                         doctest::Contains("at least"), std::runtime_error);
    CHECK_THROWS_WITH_AS(trainer::train(cfg, empty.str(), out.str(), log),
                         doctest::Contains("no images"), std::runtime_error);
    CHECK_THROWS_AS(trainer::train(cfg, (data.path / "nope").string(), out.str(), log),
                    std::runtime_error);
}
