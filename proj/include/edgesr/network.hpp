#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgesr/ops.hpp"
#include "edgesr/rng.hpp"
#include "edgesr/tensor.hpp"

namespace edgesr {

// Named, ordered collection of tensors. Trainable parameters carry
// requires_grad; batch-norm running statistics ride along without it so that
// checkpoints capture them too.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t);
    Tensor* find(const std::string& name);
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

    std::vector<Tensor> trainable() const;
    std::size_t trainable_count() const;  // total learnable scalars
    std::size_t trainable_count_with_prefix(const std::string& prefix) const;
    void zero_grads();

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

// ---------------------------------------------------------------------------
// Layers

struct Conv2d {
    Tensor w, b;
    int stride = 1, pad = 0;
    Conv2d() = default;
    Conv2d(ParamStore& store, const std::string& name, int cin, int cout, int k, int stride,
           int pad, Rng& rng);
    Tensor forward(const Tensor& x) const { return ops::conv2d(x, w, b, stride, pad); }
};

struct LinearLayer {
    Tensor w, b;
    LinearLayer() = default;
    LinearLayer(ParamStore& store, const std::string& name, int fin, int fout, Rng& rng,
                bool zero_init = false);
    Tensor forward(const Tensor& x) const { return ops::linear(x, w, b); }
};

struct PReluLayer {
    Tensor alpha;
    PReluLayer() = default;
    PReluLayer(ParamStore& store, const std::string& name, int channels, float init = 0.25f);
    Tensor forward(const Tensor& x) const { return ops::prelu(x, alpha); }
};

struct BatchNormLayer {
    BnState state;
    float eps = 1e-5f, momentum = 0.1f;
    BatchNormLayer() = default;
    BatchNormLayer(ParamStore& store, const std::string& name, int channels, float eps = 1e-5f,
                   float momentum = 0.1f);
    Tensor forward(const Tensor& x, bool training) {
        return ops::batch_norm(x, state, training, eps, momentum);
    }
};

// ---------------------------------------------------------------------------
// Blocks (Fig 2 / the hybrid residual design)

// Shared edge processor: conv3x3 (1->Ce) + PReLU + conv1x1 (Ce->Ce).
struct EdgeEncoder {
    Conv2d conv3, conv1;
    PReluLayer act;
    EdgeEncoder() = default;
    EdgeEncoder(ParamStore& store, const std::string& name, int ce, Rng& rng);
    Tensor forward(const Tensor& edge) const { return conv1.forward(act.forward(conv3.forward(edge))); }
};

// Normalized edge attention: FiLM-style channel modulation of BN(x) plus an
// edge-derived spatial gate, fused by a 1x1 conv with a residual connection.
struct NeaBlock {
    LinearLayer film;        // Ce -> 2C, zero-initialized (identity at start)
    Conv2d spatial1;         // 1x1 Ce -> Ce
    PReluLayer spatial_act;  // Ce
    Conv2d spatial2;         // 3x3 Ce -> 1
    BatchNormLayer bn;       // C
    Conv2d fusion;           // 1x1 2C -> C
    int channels = 0, edge_channels = 0;

    NeaBlock() = default;
    NeaBlock(ParamStore& store, const std::string& name, int c, int ce, Rng& rng);

    // eprime: encoded edge features [N,Ce,h,w]; bilinearly resized to match
    // x when the spatial dims differ.
    Tensor forward(const Tensor& x, const Tensor& eprime, bool training);
};

// Two convolutions and two edge-conditioned submodules with an outer skip.
// Without edge attention each submodule degrades to plain BN + residual at
// equal depth.
struct HybridEdgeResBlock {
    Conv2d conv1, conv2;
    NeaBlock nea1, nea2;
    BatchNormLayer bn1, bn2;  // used only when edge attention is off
    PReluLayer act;
    bool use_edge_attention = true;

    HybridEdgeResBlock() = default;
    HybridEdgeResBlock(ParamStore& store, const std::string& name, int c, int ce,
                       bool use_edge_attention, Rng& rng);
    Tensor forward(const Tensor& x, const Tensor& eprime, bool training);
};

// ---------------------------------------------------------------------------
// Networks

struct GeneratorConfig {
    int scale = 4;
    int blocks = 8;          // B
    int channels = 64;       // C
    int edge_channels = 32;  // Ce
    bool use_edge_attention = true;
};

class Generator {
public:
    Generator(const GeneratorConfig& cfg, std::uint64_t seed);

    // lr: [N,3,H,W] in [0,1]; edge: [N,1,H,W] binary. Output [N,3,sH,sW],
    // unbounded (clipped at image emission).
    Tensor forward(const Tensor& lr, const Tensor& edge, bool training);

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const GeneratorConfig& config() const { return cfg_; }
    std::size_t count_params() const { return store_.trainable_count(); }
    // learnable scalars belonging to the edge-attention machinery
    std::size_t count_edge_attention_params() const;

private:
    GeneratorConfig cfg_;
    ParamStore store_;
    Conv2d initial_, skip_conv_, output_;
    PReluLayer initial_act_;
    BatchNormLayer skip_bn_;
    EdgeEncoder edge_encoder_;
    std::vector<HybridEdgeResBlock> blocks_;
    struct Upsampler {
        Conv2d conv;
        PReluLayer act;
        int r = 2;
    };
    std::vector<Upsampler> upsamplers_;
};

struct DiscriminatorConfig {
    int base_channels = 64;
    int stages = 4;  // each stage halves the spatial dims and doubles channels
};

class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

    // img: [N,3,H,W]; returns one logit per image [N,1].
    Tensor forward(const Tensor& img, bool training);

    ParamStore& params() { return store_; }
    const DiscriminatorConfig& config() const { return cfg_; }
    int min_input_size() const { return 2 << cfg_.stages; }

private:
    DiscriminatorConfig cfg_;
    ParamStore store_;
    Conv2d head_;
    std::vector<Conv2d> convs_;
    std::vector<BatchNormLayer> bns_;
    LinearLayer out_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: magic "EATSR", u16 version, u32 tensor count, then per
// tensor: u16 name length + UTF-8 name, u8 rank, u32 dims, raw little-endian
// f32 payload. Bit-exact round trip.

inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_tensors(std::ostream& out, const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> read_tensors(std::istream& in);

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

// Copies values from `loaded` into matching store entries; throws on missing
// names or shape mismatches.
void assign_params(ParamStore& store, const std::vector<std::pair<std::string, Tensor>>& loaded,
                   const std::string& prefix = "");

}  // namespace edgesr
