#include "edgesr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "edgesr/image.hpp"
#include "edgesr/rng.hpp"

namespace fs = std::filesystem;

namespace edgesr {

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Tensor> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const Tensor& p : params_) {
        m_.push_back(Tensor::zeros(p.shape()));
        v_.push_back(Tensor::zeros(p.shape()));
    }
}

void Adam::step() {
    ++t_;
    const float bc1 = 1.f - static_cast<float>(std::pow(b1_, static_cast<double>(t_)));
    const float bc2 = 1.f - static_cast<float>(std::pow(b2_, static_cast<double>(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        const bool has_g = p.has_grad();
        const float* g = has_g ? p.grad().data() : nullptr;
        float* m = m_[i].data();
        float* v = v_[i].data();
        float* x = p.data();
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const float gj = has_g ? g[j] : 0.f;
            m[j] = b1_ * m[j] + (1.f - b1_) * gj;
            v[j] = b2_ * v[j] + (1.f - b2_) * gj * gj;
            x[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
}

namespace trainer {

CannyParams canny_params(const TrainConfig& cfg) {
    CannyParams p;
    p.sigma = cfg.canny_sigma;
    p.ksize = cfg.canny_ksize;
    p.low = cfg.canny_low;
    p.high = cfg.canny_high;
    return p;
}

// ---------------------------------------------------------------------------
// serialization helpers

namespace {

constexpr float kStateVersion = 1.f;
constexpr float kOptVersion = 1.f;

Tensor u64s_to_tensor(const std::vector<std::uint64_t>& vals) {
    // raw bit transport: each u64 becomes two f32 payloads
    Tensor t({static_cast<int>(vals.size() * 2)}, 0.f);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const std::uint32_t lo = static_cast<std::uint32_t>(vals[i] & 0xffffffffULL);
        const std::uint32_t hi = static_cast<std::uint32_t>(vals[i] >> 32);
        std::memcpy(&t.data()[2 * i], &lo, 4);
        std::memcpy(&t.data()[2 * i + 1], &hi, 4);
    }
    return t;
}

std::vector<std::uint64_t> tensor_to_u64s(const Tensor& t) {
    std::vector<std::uint64_t> vals(t.numel() / 2);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        std::uint32_t lo, hi;
        std::memcpy(&lo, &t.data()[2 * i], 4);
        std::memcpy(&hi, &t.data()[2 * i + 1], 4);
        vals[i] = (static_cast<std::uint64_t>(hi) << 32) | lo;
    }
    return vals;
}

Tensor config_to_tensor(const TrainConfig& c) {
    const std::vector<float> f = {
        static_cast<float>(c.scale),        static_cast<float>(c.patch_lr),
        static_cast<float>(c.batch_size),   static_cast<float>(c.epochs_pretrain),
        static_cast<float>(c.epochs_full),  static_cast<float>(c.patches_per_epoch),
        c.lambda_pix,                       c.lambda_perc_pre,
        c.lambda_perc_full,                 c.lambda_adv_full,
        c.label_smoothing,                  c.lr,
        c.lr_decay,
        c.beta1,                            c.beta2,
        static_cast<float>(c.blocks),       static_cast<float>(c.channels),
        static_cast<float>(c.edge_channels), static_cast<float>(c.disc_base_channels),
        static_cast<float>(c.disc_stages),  c.canny_sigma,
        static_cast<float>(c.canny_ksize),  c.canny_low,
        c.canny_high,                       c.use_edge_attention ? 1.f : 0.f,
        c.use_pixel_loss ? 1.f : 0.f,       c.use_perceptual_loss ? 1.f : 0.f,
        c.use_adversarial_loss ? 1.f : 0.f,
    };
    return Tensor({static_cast<int>(f.size())}, f);
}

TrainConfig config_from_tensor(const Tensor& t) {
    if (t.numel() != 28) throw std::runtime_error("state: unexpected config block size");
    const float* f = t.data();
    TrainConfig c;
    int i = 0;
    c.scale = static_cast<int>(f[i++]);
    c.patch_lr = static_cast<int>(f[i++]);
    c.batch_size = static_cast<int>(f[i++]);
    c.epochs_pretrain = static_cast<int>(f[i++]);
    c.epochs_full = static_cast<int>(f[i++]);
    c.patches_per_epoch = static_cast<int>(f[i++]);
    c.lambda_pix = f[i++];
    c.lambda_perc_pre = f[i++];
    c.lambda_perc_full = f[i++];
    c.lambda_adv_full = f[i++];
    c.label_smoothing = f[i++];
    c.lr = f[i++];
    c.lr_decay = f[i++];
    c.beta1 = f[i++];
    c.beta2 = f[i++];
    c.blocks = static_cast<int>(f[i++]);
    c.channels = static_cast<int>(f[i++]);
    c.edge_channels = static_cast<int>(f[i++]);
    c.disc_base_channels = static_cast<int>(f[i++]);
    c.disc_stages = static_cast<int>(f[i++]);
    c.canny_sigma = f[i++];
    c.canny_ksize = static_cast<int>(f[i++]);
    c.canny_low = f[i++];
    c.canny_high = f[i++];
    c.use_edge_attention = f[i++] != 0.f;
    c.use_pixel_loss = f[i++] != 0.f;
    c.use_perceptual_loss = f[i++] != 0.f;
    c.use_adversarial_loss = f[i++] != 0.f;
    return c;
}

const Tensor& find_tensor(const std::vector<std::pair<std::string, Tensor>>& tensors,
                          const std::string& name) {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw std::runtime_error("state: missing tensor " + name);
}

// ---------------------------------------------------------------------------
// session

struct Session {
    TrainConfig cfg;
    std::unique_ptr<Generator> gen;
    std::unique_ptr<Discriminator> disc;
    std::unique_ptr<FeatureExtractor> feat;
    std::unique_ptr<Adam> opt_g, opt_d;
    Rng rng{0};
    int epoch_done = 0;
    long step = 0;
    // cumulative loss sums: pix, perc, adv, total, d, count
    double stats[6] = {0, 0, 0, 0, 0, 0};
    double first_pixel_loss = -1.0, last_pixel_loss = 0.0;
};

Session make_session(const TrainConfig& cfg) {
    Session s;
    s.cfg = cfg;
    GeneratorConfig gc{cfg.scale, cfg.blocks, cfg.channels, cfg.edge_channels,
                       cfg.use_edge_attention};
    s.gen = std::make_unique<Generator>(gc, cfg.seed);
    if (cfg.use_adversarial_loss && cfg.epochs_full > 0) {
        DiscriminatorConfig dc{cfg.disc_base_channels, cfg.disc_stages};
        s.disc = std::make_unique<Discriminator>(dc, cfg.seed + 1);
    }
    if (cfg.use_perceptual_loss) s.feat = std::make_unique<FeatureExtractor>(cfg.perceptual_seed);
    s.opt_g = std::make_unique<Adam>(s.gen->params().trainable(), cfg.lr, cfg.beta1, cfg.beta2);
    if (s.disc)
        s.opt_d = std::make_unique<Adam>(s.disc->params().trainable(), cfg.lr, cfg.beta1, cfg.beta2);
    s.rng = Rng(cfg.seed);
    return s;
}

void save_state(const Session& s, const std::string& path) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.emplace_back("meta.state_version", Tensor::scalar(kStateVersion));
    tensors.emplace_back("meta.config", config_to_tensor(s.cfg));
    tensors.emplace_back("meta.seeds", u64s_to_tensor({s.cfg.seed, s.cfg.perceptual_seed}));
    tensors.emplace_back("meta.progress",
                         Tensor({2}, {static_cast<float>(s.epoch_done), static_cast<float>(s.step)}));
    const auto rs = s.rng.state();
    tensors.emplace_back("meta.rng", u64s_to_tensor({rs[0], rs[1], rs[2], rs[3]}));
    tensors.emplace_back("meta.stats", Tensor({6}, std::vector<float>(s.stats, s.stats + 6)));
    tensors.emplace_back("meta.first_last_pix",
                         Tensor({2}, {static_cast<float>(s.first_pixel_loss),
                                      static_cast<float>(s.last_pixel_loss)}));
    for (const auto& [n, t] : s.gen->params().entries()) tensors.emplace_back("g." + n, t);
    // optimizer-moment section with its own version guard
    tensors.emplace_back("opt.version", Tensor::scalar(kOptVersion));
    tensors.emplace_back("opt.t", Tensor({2}, {static_cast<float>(s.opt_g->t()),
                                               s.opt_d ? static_cast<float>(s.opt_d->t()) : 0.f}));
    for (std::size_t i = 0; i < s.opt_g->m().size(); ++i) {
        tensors.emplace_back("opt.g.m." + std::to_string(i), s.opt_g->m()[i]);
        tensors.emplace_back("opt.g.v." + std::to_string(i), s.opt_g->v()[i]);
    }
    if (s.disc) {
        for (const auto& [n, t] : s.disc->params().entries()) tensors.emplace_back("d." + n, t);
        for (std::size_t i = 0; i < s.opt_d->m().size(); ++i) {
            tensors.emplace_back("opt.d.m." + std::to_string(i), s.opt_d->m()[i]);
            tensors.emplace_back("opt.d.v." + std::to_string(i), s.opt_d->v()[i]);
        }
    }
    save_checkpoint(path, tensors);
}

Session load_state(const std::string& path) {
    const auto tensors = load_checkpoint(path);
    if (find_tensor(tensors, "meta.state_version").item() != kStateVersion)
        throw std::runtime_error("state: unsupported state version in " + path);
    TrainConfig cfg = config_from_tensor(find_tensor(tensors, "meta.config"));
    const auto seeds = tensor_to_u64s(find_tensor(tensors, "meta.seeds"));
    cfg.seed = seeds[0];
    cfg.perceptual_seed = seeds[1];

    Session s = make_session(cfg);
    const Tensor& progress = find_tensor(tensors, "meta.progress");
    s.epoch_done = static_cast<int>(progress.data()[0]);
    s.step = static_cast<long>(progress.data()[1]);
    const auto rs = tensor_to_u64s(find_tensor(tensors, "meta.rng"));
    s.rng.set_state({rs[0], rs[1], rs[2], rs[3]});
    const Tensor& stats = find_tensor(tensors, "meta.stats");
    for (int i = 0; i < 6; ++i) s.stats[i] = stats.data()[i];
    const Tensor& fl = find_tensor(tensors, "meta.first_last_pix");
    s.first_pixel_loss = fl.data()[0];
    s.last_pixel_loss = fl.data()[1];

    assign_params(s.gen->params(), tensors, "g.");
    if (find_tensor(tensors, "opt.version").item() != kOptVersion)
        throw std::runtime_error("state: unsupported optimizer section version in " + path);
    const Tensor& ts = find_tensor(tensors, "opt.t");
    s.opt_g->set_t(static_cast<std::int64_t>(ts.data()[0]));
    auto load_moments = [&tensors](Adam& opt, const std::string& prefix) {
        for (std::size_t i = 0; i < opt.m().size(); ++i) {
            opt.m()[i].vec() = find_tensor(tensors, prefix + ".m." + std::to_string(i)).vec();
            opt.v()[i].vec() = find_tensor(tensors, prefix + ".v." + std::to_string(i)).vec();
        }
    };
    load_moments(*s.opt_g, "opt.g");
    if (s.disc) {
        assign_params(s.disc->params(), tensors, "d.");
        s.opt_d->set_t(static_cast<std::int64_t>(ts.data()[1]));
        load_moments(*s.opt_d, "opt.d");
    }
    return s;
}

// ---------------------------------------------------------------------------
// data plumbing

std::vector<Image> load_corpus(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("train: " + dir + " is not a directory");
    std::map<std::string, fs::path> files;  // sorted by name for determinism
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM")
            files[e.path().filename().string()] = e.path();
    }
    std::vector<Image> images;
    for (const auto& [name, p] : files) images.push_back(imageio::load_image(p.string()));
    if (images.empty()) throw std::runtime_error("train: no images found in " + dir);
    return images;
}

struct Batch {
    Tensor lr, hr, edge;
    int size = 0;
};

Batch make_batch(const std::vector<PatchPair>& pairs, const std::vector<EdgeMap>& edges,
                 std::size_t begin, std::size_t end, bool want_edge) {
    const int B = static_cast<int>(end - begin);
    const int h = pairs[begin].lr.height, w = pairs[begin].lr.width;
    const int H = pairs[begin].hr.height, W = pairs[begin].hr.width;
    Batch b;
    b.size = B;
    b.lr = Tensor::zeros({B, 3, h, w});
    b.hr = Tensor::zeros({B, 3, H, W});
    if (want_edge) b.edge = Tensor::zeros({B, 1, h, w});
    for (int n = 0; n < B; ++n) {
        const PatchPair& p = pairs[begin + n];
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    b.lr.data()[((static_cast<std::size_t>(n) * 3 + c) * h + y) * w + x] =
                        p.lr.at(y, x, c) / 255.f;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    b.hr.data()[((static_cast<std::size_t>(n) * 3 + c) * H + y) * W + x] =
                        p.hr.at(y, x, c) / 255.f;
        if (want_edge)
            std::copy(edges[begin + n].data.begin(), edges[begin + n].data.end(),
                      b.edge.data() + static_cast<std::size_t>(n) * h * w);
    }
    return b;
}

Tensor smoothed_disc_loss(const Tensor& logits_real, const Tensor& logits_fake, float smoothing) {
    // target 1 - smoothing for real: t*softplus(-x) + (1-t)*softplus(x)
    const float t = 1.f - smoothing;
    Tensor real = ops::add(ops::scale(ops::mean_all(ops::softplus(ops::neg(logits_real))), t),
                           ops::scale(ops::mean_all(ops::softplus(logits_real)), 1.f - t));
    Tensor fake = ops::mean_all(ops::softplus(logits_fake));
    return ops::scale(ops::add(real, fake), 0.5f);
}

std::string epoch_checkpoint_path(const std::string& out_dir, int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_epoch_%04d.eatsr", epoch);
    return (fs::path(out_dir) / buf).string();
}

TrainResult run_training(Session& s, const std::string& hr_dir, const std::string& out_dir,
                         std::ostream& log, int stop_after_epochs) {
    const TrainConfig& cfg = s.cfg;
    cfg.validate();
    fs::create_directories(out_dir);
    {  // fail before training if the directory is unwritable
        const fs::path probe = fs::path(out_dir) / ".write_probe";
        std::ofstream p(probe);
        if (!p) throw std::runtime_error("train: checkpoint dir " + out_dir + " is not writable");
        p.close();
        fs::remove(probe);
    }
    const std::vector<Image> images = load_corpus(hr_dir);
    const int patch_hr = cfg.patch_lr * cfg.scale;
    bool any_usable = false;
    for (const Image& im : images)
        if (im.height >= patch_hr && im.width >= patch_hr) any_usable = true;
    if (!any_usable)
        throw std::runtime_error("train: no image in " + hr_dir + " is at least " +
                                 std::to_string(patch_hr) + "x" + std::to_string(patch_hr));

    const CannyParams cp = canny_params(cfg);
    const int total_epochs = cfg.epochs_pretrain + cfg.epochs_full;
    const std::string state_path = (fs::path(out_dir) / "state.eatsr").string();
    const std::string final_path = (fs::path(out_dir) / "final.eatsr").string();

    if (s.epoch_done == 0) {
        save_generator_checkpoint(epoch_checkpoint_path(out_dir, 0), *s.gen, cfg);
        save_state(s, state_path);
    }

    const int run_until =
        stop_after_epochs > 0 ? std::min(total_epochs, stop_after_epochs) : total_epochs;
    for (int epoch = s.epoch_done; epoch < run_until; ++epoch) {
        const bool full_stage = epoch >= cfg.epochs_pretrain;
        const float epoch_lr =
            cfg.lr * static_cast<float>(std::pow(cfg.lr_decay, static_cast<double>(epoch)));
        s.opt_g->set_lr(epoch_lr);
        if (s.opt_d) s.opt_d->set_lr(epoch_lr);
        LossWeights w;
        w.w_pixel = cfg.use_pixel_loss ? cfg.lambda_pix : 0.f;
        w.w_perceptual =
            cfg.use_perceptual_loss ? (full_stage ? cfg.lambda_perc_full : cfg.lambda_perc_pre) : 0.f;
        w.w_adversarial = (s.disc && full_stage) ? cfg.lambda_adv_full : 0.f;
        {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "# epoch %d stage %s lambda_pix %g lambda_perc %g lambda_adv %g\n", epoch,
                          full_stage ? "full" : "pretrain", w.w_pixel, w.w_perceptual,
                          w.w_adversarial);
            log << buf;
        }

        std::vector<PatchPair> pairs =
            imageio::sample_patch_pairs(images, cfg.scale, cfg.patch_lr, cfg.patches_per_epoch, s.rng);
        std::vector<EdgeMap> edges;  // one Canny pass per patch, cached for the epoch
        if (cfg.use_edge_attention) {
            edges.reserve(pairs.size());
            for (const PatchPair& p : pairs) edges.push_back(canny::detect(p.lr, cp));
        }

        for (std::size_t begin = 0; begin < pairs.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(pairs.size(), begin + cfg.batch_size);
            Batch batch = make_batch(pairs, edges, begin, end, cfg.use_edge_attention);

            double d_loss_val = 0.0;
            if (s.disc && full_stage) {
                Tensor sr_fake;
                {
                    NoGradGuard ng;
                    sr_fake = s.gen->forward(batch.lr, batch.edge, /*training=*/true);
                }
                s.disc->params().zero_grads();
                Tensor logits_real = s.disc->forward(batch.hr, true);
                Tensor logits_fake = s.disc->forward(sr_fake, true);
                Tensor d_loss =
                    cfg.label_smoothing > 0.f
                        ? smoothed_disc_loss(logits_real, logits_fake, cfg.label_smoothing)
                        : objective::adversarial_loss_discriminator(logits_real, logits_fake);
                backward(d_loss);
                s.opt_d->step();
                d_loss_val = d_loss.item();
            }

            s.gen->params().zero_grads();
            if (s.disc) s.disc->params().zero_grads();
            Tensor sr = s.gen->forward(batch.lr, batch.edge, /*training=*/true);
            Tensor l_pix = objective::pixel_loss(sr, batch.hr);
            Tensor l_perc;
            if (s.feat) l_perc = objective::perceptual_loss(*s.feat, sr, batch.hr);
            Tensor l_adv;
            if (s.disc && full_stage)
                l_adv = objective::adversarial_loss_generator(s.disc->forward(sr, true));
            Tensor total = objective::total_loss(w, l_pix, l_perc, l_adv);
            backward(total);
            s.opt_g->step();

            const double pv = l_pix.item();
            const double perc_v = l_perc.defined() ? l_perc.item() : 0.0;
            const double adv_v = l_adv.defined() ? l_adv.item() : 0.0;
            const double tot_v = total.item();
            if (s.first_pixel_loss < 0) s.first_pixel_loss = pv;
            s.last_pixel_loss = pv;
            s.stats[0] += pv;
            s.stats[1] += perc_v;
            s.stats[2] += adv_v;
            s.stats[3] += tot_v;
            s.stats[4] += d_loss_val;
            s.stats[5] += 1;
            ++s.step;
            char buf[200];
            std::snprintf(buf, sizeof buf, "%5d %8ld % .6e % .6e % .6e % .6e % .6e\n", epoch,
                          s.step, pv, perc_v, adv_v, tot_v, d_loss_val);
            log << buf;
        }

        s.epoch_done = epoch + 1;
        save_generator_checkpoint(epoch_checkpoint_path(out_dir, s.epoch_done), *s.gen, cfg);
        save_state(s, state_path);
    }

    const bool completed = s.epoch_done >= total_epochs;
    if (completed) save_generator_checkpoint(final_path, *s.gen, cfg);
    TrainResult r;
    r.final_checkpoint = completed ? final_path : "";
    r.state_path = state_path;
    r.steps = s.step;
    r.first_pixel_loss = s.first_pixel_loss;
    r.last_pixel_loss = s.last_pixel_loss;
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// public entry points

TrainResult train(const TrainConfig& cfg, const std::string& hr_dir, const std::string& out_dir,
                  std::ostream& log, int stop_after_epochs) {
    Session s = make_session(cfg);
    return run_training(s, hr_dir, out_dir, log, stop_after_epochs);
}

TrainResult resume(const std::string& state_path, const std::string& hr_dir,
                   const std::string& out_dir, std::ostream& log, int stop_after_epochs) {
    Session s = load_state(state_path);
    return run_training(s, hr_dir, out_dir, log, stop_after_epochs);
}

TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
    if (variant == "no_edge_attention")
        cfg.use_edge_attention = false;
    else if (variant == "no_pixel")
        cfg.use_pixel_loss = false;
    else if (variant == "no_perceptual")
        cfg.use_perceptual_loss = false;
    else if (variant == "no_adversarial")
        cfg.use_adversarial_loss = false;
    else if (variant != "full")
        throw std::invalid_argument(
            "ablate: unknown variant '" + variant +
            "' (expected no_edge_attention, no_pixel, no_perceptual, no_adversarial or full)");
    return cfg;
}

void save_generator_checkpoint(const std::string& path, const Generator& gen,
                               const TrainConfig& cfg) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    const GeneratorConfig& gc = gen.config();
    tensors.emplace_back(
        "meta", Tensor({9}, {static_cast<float>(gc.scale), static_cast<float>(gc.blocks),
                             static_cast<float>(gc.channels), static_cast<float>(gc.edge_channels),
                             gc.use_edge_attention ? 1.f : 0.f, cfg.canny_sigma,
                             static_cast<float>(cfg.canny_ksize), cfg.canny_low, cfg.canny_high}));
    for (const auto& [n, t] : gen.params().entries()) tensors.emplace_back("g." + n, t);
    save_checkpoint(path, tensors);
}

std::unique_ptr<Generator> load_generator_checkpoint(const std::string& path,
                                                     CannyParams* canny_out) {
    const auto tensors = load_checkpoint(path);
    const Tensor& meta = find_tensor(tensors, "meta");
    if (meta.numel() != 9) throw std::runtime_error("checkpoint: unexpected meta block in " + path);
    GeneratorConfig gc;
    gc.scale = static_cast<int>(meta.data()[0]);
    gc.blocks = static_cast<int>(meta.data()[1]);
    gc.channels = static_cast<int>(meta.data()[2]);
    gc.edge_channels = static_cast<int>(meta.data()[3]);
    gc.use_edge_attention = meta.data()[4] != 0.f;
    if (canny_out) {
        canny_out->sigma = meta.data()[5];
        canny_out->ksize = static_cast<int>(meta.data()[6]);
        canny_out->low = meta.data()[7];
        canny_out->high = meta.data()[8];
        canny_out->relative = true;
    }
    auto gen = std::make_unique<Generator>(gc, /*seed=*/0);
    assign_params(gen->params(), tensors, "g.");
    return gen;
}

void super_resolve(const std::string& ckpt_path, const std::string& input_path,
                   const std::string& out_dir, int expect_scale) {
    CannyParams cp;
    std::unique_ptr<Generator> gen = load_generator_checkpoint(ckpt_path, &cp);
    if (expect_scale != 0 && expect_scale != gen->config().scale)
        throw std::runtime_error("sr: requested scale " + std::to_string(expect_scale) +
                                 " but checkpoint was trained for scale " +
                                 std::to_string(gen->config().scale));
    std::vector<fs::path> inputs;
    if (fs::is_directory(input_path)) {
        std::map<std::string, fs::path> files;
        for (const auto& e : fs::directory_iterator(input_path)) {
            if (!e.is_regular_file()) continue;
            const std::string ext = e.path().extension().string();
            if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM")
                files[e.path().filename().string()] = e.path();
        }
        for (const auto& [n, p] : files) inputs.push_back(p);
        if (inputs.empty())
            throw std::runtime_error("sr: no images found in " + input_path);
    } else if (fs::is_regular_file(input_path)) {
        inputs.push_back(input_path);
    } else {
        throw std::runtime_error("sr: input " + input_path + " does not exist");
    }
    fs::create_directories(out_dir);
    for (const fs::path& p : inputs) {
        const Image lr = imageio::load_image(p.string());
        Tensor edge;
        if (gen->config().use_edge_attention)
            edge = canny::to_tensor(canny::detect(lr, cp));
        Tensor out;
        {
            NoGradGuard ng;
            out = gen->forward(imageio::to_tensor(lr), edge, /*training=*/false);
        }
        const Image sr = imageio::from_tensor(out);
        const std::string out_name = p.stem().string() + ".png";
        imageio::save_image(sr, (fs::path(out_dir) / out_name).string());
    }
}

}  // namespace trainer
}  // namespace edgesr
