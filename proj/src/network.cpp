#include "edgesr/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace edgesr {

// ---------------------------------------------------------------------------
// ParamStore

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (find(name)) throw std::logic_error("ParamStore: duplicate name " + name);
    entries_.emplace_back(name, t);
    return t;
}

Tensor* ParamStore::find(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name) return &t;
    return nullptr;
}

std::vector<Tensor> ParamStore::trainable() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : entries_)
        if (t.requires_grad()) out.push_back(t);
    return out;
}

std::size_t ParamStore::trainable_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_)
        if (t.requires_grad()) n += t.numel();
    return n;
}

std::size_t ParamStore::trainable_count_with_prefix(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_)
        if (t.requires_grad() && name.compare(0, prefix.size(), prefix) == 0) n += t.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Layers

namespace {

// Kaiming-uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape), 0.f, /*requires_grad=*/true);
    for (std::size_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

}  // namespace

Conv2d::Conv2d(ParamStore& store, const std::string& name, int cin, int cout, int k, int stride,
               int pad, Rng& rng)
    : stride(stride), pad(pad) {
    const std::size_t fan_in = static_cast<std::size_t>(cin) * k * k;
    w = store.add(name + ".w", kaiming_uniform({cout, cin, k, k}, fan_in, rng));
    b = store.add(name + ".b", Tensor::zeros({cout}, /*requires_grad=*/true));
}

LinearLayer::LinearLayer(ParamStore& store, const std::string& name, int fin, int fout, Rng& rng,
                         bool zero_init) {
    if (zero_init)
        w = store.add(name + ".w", Tensor::zeros({fout, fin}, /*requires_grad=*/true));
    else
        w = store.add(name + ".w", kaiming_uniform({fout, fin}, static_cast<std::size_t>(fin), rng));
    b = store.add(name + ".b", Tensor::zeros({fout}, /*requires_grad=*/true));
}

PReluLayer::PReluLayer(ParamStore& store, const std::string& name, int channels, float init) {
    alpha = store.add(name + ".alpha", Tensor({channels}, init, /*requires_grad=*/true));
}

BatchNormLayer::BatchNormLayer(ParamStore& store, const std::string& name, int channels, float eps,
                               float momentum)
    : state(channels), eps(eps), momentum(momentum) {
    store.add(name + ".running_mean", state.running_mean);
    store.add(name + ".running_var", state.running_var);
}

// ---------------------------------------------------------------------------
// Blocks

EdgeEncoder::EdgeEncoder(ParamStore& store, const std::string& name, int ce, Rng& rng)
    : conv3(store, name + ".conv3", 1, ce, 3, 1, 1, rng),
      conv1(store, name + ".conv1", ce, ce, 1, 1, 0, rng),
      act(store, name + ".act", ce) {}

NeaBlock::NeaBlock(ParamStore& store, const std::string& name, int c, int ce, Rng& rng)
    : film(store, name + ".film", ce, 2 * c, rng, /*zero_init=*/true),
      spatial1(store, name + ".spatial1", ce, ce, 1, 1, 0, rng),
      spatial_act(store, name + ".spatial_act", ce),
      spatial2(store, name + ".spatial2", ce, 1, 3, 1, 1, rng),
      bn(store, name + ".bn", c),
      fusion(store, name + ".fusion", 2 * c, c, 1, 1, 0, rng),
      channels(c),
      edge_channels(ce) {}

Tensor NeaBlock::forward(const Tensor& x, const Tensor& eprime, bool training) {
    Tensor e = eprime;
    if (e.dim(2) != x.dim(2) || e.dim(3) != x.dim(3))
        e = ops::resize_bilinear(e, x.dim(2), x.dim(3));

    // channel modulation: (gamma, beta) from globally pooled edge features
    Tensor gb = film.forward(ops::global_avg_pool(e));  // [N, 2C]
    Tensor gamma = ops::reshape(ops::slice_axis1(gb, 0, channels), {x.dim(0), channels, 1, 1});
    Tensor beta = ops::reshape(ops::slice_axis1(gb, channels, channels), {x.dim(0), channels, 1, 1});
    Tensor x_norm = ops::add(ops::mul(bn.forward(x, training), ops::add_scalar(gamma, 1.f)), beta);

    // spatial gate from the same edge features
    Tensor a = ops::sigmoid(spatial2.forward(spatial_act.forward(spatial1.forward(e))));
    Tensor x_att = ops::mul(a, x);

    return ops::add(fusion.forward(ops::concat_channels(x_att, x_norm)), x);
}

HybridEdgeResBlock::HybridEdgeResBlock(ParamStore& store, const std::string& name, int c, int ce,
                                       bool use_edge_attention, Rng& rng)
    : conv1(store, name + ".conv1", c, c, 3, 1, 1, rng),
      conv2(store, name + ".conv2", c, c, 3, 1, 1, rng),
      act(store, name + ".act", c),
      use_edge_attention(use_edge_attention) {
    if (use_edge_attention) {
        nea1 = NeaBlock(store, name + ".nea1", c, ce, rng);
        nea2 = NeaBlock(store, name + ".nea2", c, ce, rng);
    } else {
        bn1 = BatchNormLayer(store, name + ".bn1", c);
        bn2 = BatchNormLayer(store, name + ".bn2", c);
    }
}

Tensor HybridEdgeResBlock::forward(const Tensor& x, const Tensor& eprime, bool training) {
    Tensor y1 = conv1.forward(x);
    Tensor x1 = use_edge_attention ? nea1.forward(y1, eprime, training)
                                   : ops::add(bn1.forward(y1, training), y1);
    Tensor x2 = act.forward(x1);
    Tensor y2 = conv2.forward(x2);
    Tensor x3 = use_edge_attention ? nea2.forward(y2, eprime, training)
                                   : ops::add(bn2.forward(y2, training), y2);
    return ops::add(x, x3);
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.scale != 2 && cfg.scale != 3 && cfg.scale != 4)
        throw std::invalid_argument("generator: scale must be 2, 3 or 4, got " +
                                    std::to_string(cfg.scale));
    if (cfg.blocks < 1 || cfg.channels < 1 || cfg.edge_channels < 1)
        throw std::invalid_argument("generator: blocks/channels must be positive");
    Rng rng(seed);
    const int c = cfg.channels, ce = cfg.edge_channels;

    initial_ = Conv2d(store_, "initial", 3, c, 9, 1, 4, rng);
    initial_act_ = PReluLayer(store_, "initial_act", c);
    if (cfg.use_edge_attention) edge_encoder_ = EdgeEncoder(store_, "edge_encoder", ce, rng);
    for (int i = 0; i < cfg.blocks; ++i)
        blocks_.emplace_back(store_, "blocks." + std::to_string(i), c, ce, cfg.use_edge_attention,
                             rng);
    skip_conv_ = Conv2d(store_, "skip_conv", c, c, 3, 1, 1, rng);
    skip_bn_ = BatchNormLayer(store_, "skip_bn", c);

    const std::vector<int> factors = cfg.scale == 4 ? std::vector<int>{2, 2}
                                                    : std::vector<int>{cfg.scale};
    for (std::size_t i = 0; i < factors.size(); ++i) {
        const int r = factors[i];
        Upsampler up;
        up.r = r;
        up.conv = Conv2d(store_, "up." + std::to_string(i) + ".conv", c, c * r * r, 3, 1, 1, rng);
        up.act = PReluLayer(store_, "up." + std::to_string(i) + ".act", c);
        upsamplers_.push_back(std::move(up));
    }
    output_ = Conv2d(store_, "output", c, 3, 9, 1, 4, rng);
}

Tensor Generator::forward(const Tensor& lr, const Tensor& edge, bool training) {
    if (lr.rank() != 4 || lr.dim(1) != 3)
        throw std::invalid_argument("generator: lr must be [N,3,H,W], got " + shape_str(lr.shape()));
    Tensor eprime;
    if (cfg_.use_edge_attention) {
        if (!edge.defined() || edge.rank() != 4 || edge.dim(1) != 1)
            throw std::invalid_argument("generator: edge must be [N,1,H,W]");
        if (edge.dim(0) != lr.dim(0))
            throw std::invalid_argument("generator: edge/lr batch mismatch");
        eprime = edge_encoder_.forward(edge);  // shared across all blocks
    }
    Tensor f0 = initial_act_.forward(initial_.forward(lr));
    Tensor f = f0;
    for (auto& block : blocks_) f = block.forward(f, eprime, training);
    f = ops::add(f, skip_bn_.forward(skip_conv_.forward(f0), training));
    for (auto& up : upsamplers_)
        f = up.act.forward(ops::pixel_shuffle(up.conv.forward(f), up.r));
    return output_.forward(f);
}

std::size_t Generator::count_edge_attention_params() const {
    std::size_t n = store_.trainable_count_with_prefix("edge_encoder.");
    for (int i = 0; i < cfg_.blocks; ++i) {
        n += store_.trainable_count_with_prefix("blocks." + std::to_string(i) + ".nea1.");
        n += store_.trainable_count_with_prefix("blocks." + std::to_string(i) + ".nea2.");
    }
    return n;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.stages < 1 || cfg.base_channels < 1)
        throw std::invalid_argument("discriminator: stages/base_channels must be positive");
    Rng rng(seed);
    head_ = Conv2d(store_, "head", 3, cfg.base_channels, 3, 1, 1, rng);
    int ch = cfg.base_channels;
    int layer = 0;
    auto add_block = [&](int cin, int cout, int stride) {
        const std::string name = "body." + std::to_string(layer++);
        convs_.emplace_back(store_, name + ".conv", cin, cout, 3, stride, 1, rng);
        bns_.emplace_back(store_, name + ".bn", cout);
    };
    for (int i = 0; i < cfg.stages; ++i) {
        add_block(ch, ch, 2);
        if (i + 1 < cfg.stages) {
            add_block(ch, 2 * ch, 1);
            ch *= 2;
        }
    }
    out_ = LinearLayer(store_, "out", ch, 1, rng);
}

Tensor Discriminator::forward(const Tensor& img, bool training) {
    if (img.rank() != 4 || img.dim(1) != 3)
        throw std::invalid_argument("discriminator: input must be [N,3,H,W], got " +
                                    shape_str(img.shape()));
    const int min_hw = min_input_size();
    if (img.dim(2) < min_hw || img.dim(3) < min_hw)
        throw std::invalid_argument("discriminator: spatial size must be >= " +
                                    std::to_string(min_hw) + ", got " + std::to_string(img.dim(2)) +
                                    "x" + std::to_string(img.dim(3)));
    Tensor f = ops::leaky_relu(head_.forward(img), 0.2f);
    for (std::size_t i = 0; i < convs_.size(); ++i)
        f = ops::leaky_relu(bns_[i].forward(convs_[i].forward(f), training), 0.2f);
    return out_.forward(ops::global_avg_pool(f));
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[5] = {'E', 'A', 'T', 'S', 'R'};

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<std::pair<std::string, Tensor>>& tensors) {
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint16_t>(out, kCheckpointVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: name too long: " + name);
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim(i)));
        for (std::size_t i = 0; i < t.numel(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &t.data()[i], 4);
            write_le<std::uint32_t>(out, bits);
        }
    }
}

std::vector<std::pair<std::string, Tensor>> read_tensors(std::istream& in) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kMagic, 5) != 0)
        throw std::runtime_error("checkpoint: bad magic (not an EATSR file)");
    const auto version = read_le<std::uint16_t>(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version));
    const auto count = read_le<std::uint32_t>(in);
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = read_le<std::uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw std::runtime_error("checkpoint: truncated file");
        const auto rank = read_le<std::uint8_t>(in);
        if (rank > 4) throw std::runtime_error("checkpoint: tensor rank " + std::to_string(rank) +
                                               " exceeds 4 (" + name + ")");
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_le<std::uint32_t>(in));
        Tensor t(shape, 0.f);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const std::uint32_t bits = read_le<std::uint32_t>(in);
            std::memcpy(&t.data()[i], &bits, 4);
        }
        tensors.emplace_back(std::move(name), std::move(t));
    }
    return tensors;
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    write_tensors(out, tensors);
    out.flush();
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    return read_tensors(in);
}

void assign_params(ParamStore& store, const std::vector<std::pair<std::string, Tensor>>& loaded,
                   const std::string& prefix) {
    for (auto& [name, dst] : store.entries()) {
        const std::string want = prefix + name;
        const Tensor* src = nullptr;
        for (const auto& [n, t] : loaded)
            if (n == want) {
                src = &t;
                break;
            }
        if (!src) throw std::runtime_error("checkpoint: missing tensor " + want);
        if (src->shape() != dst.shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + want + ": file has " +
                                     shape_str(src->shape()) + ", model expects " +
                                     shape_str(dst.shape()));
        dst.vec() = src->vec();
    }
}

}  // namespace edgesr
