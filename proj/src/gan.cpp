#include "ctforge/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ctforge/error.hpp"
#include "ctforge/spline.hpp"

namespace ctforge {

using nn::Act;
using nn::DiscTrace;
using nn::GenTrace;
using nn::LayerSpec;
using nn::NetParamsT;
using nn::ParamBlockT;
using nn::TensorT;

bool in_mask(int x, int y, int z) {
    return x >= kMaskLo && x < kMaskHi && y >= kMaskLo && y < kMaskHi &&
           z >= kMaskLo && z < kMaskHi;
}

Cube mask_center(const Cube& cube) {
    if (cube.values.dims() != Vec3i{kCubeEdge, kCubeEdge, kCubeEdge}) {
        throw ShapeMismatch("mask_center: cube must be 32x32x32");
    }
    Cube out = cube;
    for (int z = kMaskLo; z < kMaskHi; ++z) {
        for (int y = kMaskLo; y < kMaskHi; ++y) {
            for (int x = kMaskLo; x < kMaskHi; ++x) {
                out.values.at(x, y, z) = 0.0;
            }
        }
    }
    return out;
}

ParamCounts count_parameters(const GanArchConfig& cfg) {
    return {nn::layout_param_count(nn::generator_layout(cfg)),
            nn::layout_param_count(nn::discriminator_layout(cfg))};
}

namespace {

void validate_net(const NetParamsT<float>& net,
                  const std::vector<LayerSpec>& specs, const char* what) {
    if (net.blocks.size() != specs.size()) {
        throw ShapeMismatch(std::string(what) + ": wrong layer count");
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto expected = nn::zero_block_like<float>(specs[i]);
        if (net.blocks[i].w.shape != expected.w.shape ||
            net.blocks[i].b.shape != expected.b.shape ||
            net.blocks[i].gamma.shape != expected.gamma.shape ||
            net.blocks[i].beta.shape != expected.beta.shape) {
            throw ShapeMismatch(std::string(what) + ": layer " + specs[i].name +
                                " has inconsistent shapes");
        }
    }
    if (!net.all_finite()) {
        throw Error(std::string(what) + ": non-finite parameters");
    }
}

}  // namespace

void GeneratorParams::validate() const {
    validate_net(net, nn::generator_layout(config), "generator");
}

void DiscriminatorParams::validate() const {
    validate_net(net, nn::discriminator_layout(config), "discriminator");
}

GeneratorParams init_generator(const GanArchConfig& cfg, Rng& rng) {
    GeneratorParams p;
    p.config = cfg;
    p.net = nn::init_params<float>(nn::generator_layout(cfg), rng);
    return p;
}

DiscriminatorParams init_discriminator(const GanArchConfig& cfg, Rng& rng) {
    DiscriminatorParams p;
    p.config = cfg;
    p.net = nn::init_params<float>(nn::discriminator_layout(cfg), rng);
    return p;
}

TensorT<float> cube_to_tensor(const Cube& cube) {
    TensorT<float> t({1, kCubeEdge, kCubeEdge, kCubeEdge});
    // Grid3 is x-fastest; tensors are (C, D=z, H=y, W=x), also x-fastest in
    // the last dimension, so the flat layouts coincide.
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        t.data[i] = static_cast<float>(cube.values.data()[i]);
    }
    return t;
}

Cube tensor_to_cube(const TensorT<float>& t, CubeStage stage) {
    if (t.shape != std::vector<int>{1, kCubeEdge, kCubeEdge, kCubeEdge}) {
        throw ShapeMismatch("tensor_to_cube: expected (1,32,32,32)");
    }
    Cube cube;
    cube.stage = stage;
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        cube.values.data()[i] = static_cast<double>(t.data[i]);
    }
    return cube;
}

Cube generator_forward(const Cube& masked, const GeneratorParams& params,
                       RunMode mode, Rng* rng) {
    if (masked.stage != CubeStage::normalized) {
        throw Error("generator_forward: input must be a normalized-stage cube");
    }
    const auto specs = nn::generator_layout(params.config);
    const TensorT<float> x = cube_to_tensor(masked);
    const TensorT<float> y = nn::generator_net_forward(
        x, specs, params.net, mode == RunMode::train, params.config.dropout_rate,
        rng, static_cast<GenTrace<float>*>(nullptr));
    return tensor_to_cube(y, CubeStage::normalized);
}

double discriminator_forward(const Cube& context, const Cube& candidate,
                             const DiscriminatorParams& params) {
    const auto specs = nn::discriminator_layout(params.config);
    const TensorT<float> pair =
        nn::concat_channels(cube_to_tensor(context), cube_to_tensor(candidate));
    const float logit = nn::discriminator_net_forward(
        pair, specs, params.net, static_cast<DiscTrace<float>*>(nullptr));
    return 1.0 / (1.0 + std::exp(-static_cast<double>(logit)));
}

TrainingSample make_training_sample(const Cube& normalized) {
    if (normalized.stage != CubeStage::normalized) {
        throw Error("make_training_sample: cube must be normalized");
    }
    return {normalized, mask_center(normalized)};
}

double masked_reconstruction_error(const GeneratorParams& gen,
                                   const std::vector<TrainingSample>& dataset) {
    if (dataset.empty()) return 0.0;
    const auto specs = nn::generator_layout(gen.config);
    double total = 0.0;
    for (const auto& sample : dataset) {
        const TensorT<float> x = cube_to_tensor(sample.x_r_star);
        const TensorT<float> y = nn::generator_net_forward(
            x, specs, gen.net, false, 0.0, static_cast<Rng*>(nullptr),
            static_cast<GenTrace<float>*>(nullptr));
        const TensorT<float> t = cube_to_tensor(sample.x_r);
        double err = 0.0;
        for (int z = kMaskLo; z < kMaskHi; ++z) {
            for (int y_i = kMaskLo; y_i < kMaskHi; ++y_i) {
                for (int x_i = kMaskLo; x_i < kMaskHi; ++x_i) {
                    const std::size_t at =
                        static_cast<std::size_t>(x_i) +
                        32 * (static_cast<std::size_t>(y_i) +
                              32 * static_cast<std::size_t>(z));
                    err += std::fabs(static_cast<double>(y.data[at]) -
                                     static_cast<double>(t.data[at]));
                }
            }
        }
        total += err / kMaskVoxels;
    }
    return total / static_cast<double>(dataset.size());
}

TrainResult train(const std::vector<TrainingSample>& dataset,
                  const TrainConfig& config, TrainObserver* observer) {
    if (dataset.empty()) throw Error("train: dataset is empty");
    for (const auto& s : dataset) {
        if (s.x_r.stage != CubeStage::normalized ||
            s.x_r_star.stage != CubeStage::normalized) {
            throw Error("train: samples must be normalized cubes");
        }
    }

    GanArchConfig arch = config.arch;
    Rng rng(config.seed);
    GeneratorParams gen = init_generator(arch, rng);
    DiscriminatorParams disc = init_discriminator(arch, rng);
    const auto gen_specs = nn::generator_layout(arch);
    const auto disc_specs = nn::discriminator_layout(arch);

    NetParamsT<float> gen_vel = nn::zero_params<float>(gen_specs);
    NetParamsT<float> disc_vel = nn::zero_params<float>(disc_specs);
    NetParamsT<float> gen_grads = nn::zero_params<float>(gen_specs);
    NetParamsT<float> disc_grads = nn::zero_params<float>(disc_specs);

    const int n = static_cast<int>(dataset.size());
    const int batch = std::max(1, std::min(config.batch_size, n));
    int iterations = config.iterations;
    if (iterations <= 0) {
        iterations = config.epochs * ((n + batch - 1) / batch);
    }

    TrainResult result;
    result.history.reserve(static_cast<std::size_t>(iterations));

    std::vector<int> batch_idx(static_cast<std::size_t>(batch));
    for (int iter = 0; iter < iterations; ++iter) {
        for (auto& idx : batch_idx) {
            idx = static_cast<int>(rng.uniform_int(0, n - 1));
        }
        IterationStats stats;

        // Phase 2a: discriminator on real pairs, label 0.
        disc_grads.zero();
        for (int idx : batch_idx) {
            const auto& s = dataset[static_cast<std::size_t>(idx)];
            DiscTrace<float> trace;
            const TensorT<float> pair = nn::concat_channels(
                cube_to_tensor(s.x_r_star), cube_to_tensor(s.x_r));
            const float logit =
                nn::discriminator_net_forward(pair, disc_specs, disc.net, &trace);
            stats.d_loss_real += nn::bce_loss_from_logit(logit, 0.0f) / batch;
            const float dlogit =
                nn::bce_grad_from_logit(logit, 0.0f) / static_cast<float>(batch);
            nn::discriminator_net_backward(dlogit, disc_specs, disc.net, trace,
                                           &disc_grads);
        }
        nn::sgd_update(disc.net, disc_grads, disc_vel, config.lr_disc,
                       config.momentum);
        if (observer != nullptr) ++observer->d_updates;

        // Phase 2b: discriminator on generated pairs, label 1.
        disc_grads.zero();
        for (int idx : batch_idx) {
            const auto& s = dataset[static_cast<std::size_t>(idx)];
            const TensorT<float> x_star = cube_to_tensor(s.x_r_star);
            const TensorT<float> y_g = nn::generator_net_forward(
                x_star, gen_specs, gen.net, true, arch.dropout_rate, &rng,
                static_cast<GenTrace<float>*>(nullptr));
            DiscTrace<float> trace;
            const TensorT<float> pair = nn::concat_channels(x_star, y_g);
            const float logit =
                nn::discriminator_net_forward(pair, disc_specs, disc.net, &trace);
            stats.d_loss_fake += nn::bce_loss_from_logit(logit, 1.0f) / batch;
            const float dlogit =
                nn::bce_grad_from_logit(logit, 1.0f) / static_cast<float>(batch);
            nn::discriminator_net_backward(dlogit, disc_specs, disc.net, trace,
                                           &disc_grads);
        }
        nn::sgd_update(disc.net, disc_grads, disc_vel, config.lr_disc,
                       config.momentum);
        if (observer != nullptr) ++observer->d_updates;

        // Phase 3: generator through the frozen discriminator, label 0, plus
        // masked L1 reconstruction.
        if (observer != nullptr && observer->d_before_gen_phase.empty()) {
            observer->d_before_gen_phase = disc.net.flatten();
        }
        gen_grads.zero();
        for (int idx : batch_idx) {
            const auto& s = dataset[static_cast<std::size_t>(idx)];
            const TensorT<float> x_star = cube_to_tensor(s.x_r_star);
            GenTrace<float> gen_trace;
            const TensorT<float> y_g =
                nn::generator_net_forward(x_star, gen_specs, gen.net, true,
                                          arch.dropout_rate, &rng, &gen_trace);
            DiscTrace<float> disc_trace;
            const TensorT<float> pair = nn::concat_channels(x_star, y_g);
            const float logit = nn::discriminator_net_forward(pair, disc_specs,
                                                              disc.net, &disc_trace);
            stats.g_adv += nn::bce_loss_from_logit(logit, 0.0f) / batch;
            const float dlogit =
                nn::bce_grad_from_logit(logit, 0.0f) / static_cast<float>(batch);
            // Through D without touching theta_d.
            const TensorT<float> pair_grad = nn::discriminator_net_backward(
                dlogit, disc_specs, disc.net, disc_trace,
                static_cast<NetParamsT<float>*>(nullptr));
            TensorT<float> ctx_grad;
            TensorT<float> y_grad;
            nn::split_channels(pair_grad, ctx_grad, y_grad, 1);

            // Masked L1 term.
            const TensorT<float> target = cube_to_tensor(s.x_r);
            const float l1_scale = static_cast<float>(
                config.l1_weight / (static_cast<double>(kMaskVoxels) * batch));
            double l1 = 0.0;
            for (int z = kMaskLo; z < kMaskHi; ++z) {
                for (int y_i = kMaskLo; y_i < kMaskHi; ++y_i) {
                    for (int x_i = kMaskLo; x_i < kMaskHi; ++x_i) {
                        const std::size_t at =
                            static_cast<std::size_t>(x_i) +
                            32 * (static_cast<std::size_t>(y_i) +
                                  32 * static_cast<std::size_t>(z));
                        const float diff = y_g.data[at] - target.data[at];
                        l1 += std::fabs(static_cast<double>(diff));
                        y_grad.data[at] +=
                            diff > 0.0f ? l1_scale : (diff < 0.0f ? -l1_scale : 0.0f);
                    }
                }
            }
            stats.g_l1 += config.l1_weight * l1 /
                          (static_cast<double>(kMaskVoxels) * batch);
            nn::generator_net_backward(y_grad, gen_specs, gen.net, gen_trace,
                                       arch.dropout_rate, &gen_grads);
        }
        nn::sgd_update(gen.net, gen_grads, gen_vel, config.lr_gen,
                       config.momentum);
        if (observer != nullptr) {
            ++observer->g_updates;
            if (observer->d_after_gen_phase.empty()) {
                observer->d_after_gen_phase = disc.net.flatten();
            }
        }

        stats.recon_eval = masked_reconstruction_error(gen, dataset);
        const double checks[] = {stats.d_loss_real, stats.d_loss_fake,
                                 stats.g_adv, stats.g_l1, stats.recon_eval};
        for (double c : checks) {
            if (!std::isfinite(c)) {
                throw NonFiniteLoss("train: non-finite loss at iteration " +
                                    std::to_string(iter) + " (d_real=" +
                                    std::to_string(stats.d_loss_real) +
                                    ", d_fake=" + std::to_string(stats.d_loss_fake) +
                                    ", g_adv=" + std::to_string(stats.g_adv) +
                                    ", g_l1=" + std::to_string(stats.g_l1) + ")");
            }
        }
        result.history.push_back(stats);
    }

    result.generator = std::move(gen);
    result.discriminator = std::move(disc);
    return result;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

namespace {

Cuboid flip_cuboid(const Cuboid& c, bool fx, bool fy) {
    Cuboid out = c;
    const Vec3i d = c.voxels.dims();
    for (int z = 0; z < d.z; ++z) {
        for (int y = 0; y < d.y; ++y) {
            for (int x = 0; x < d.x; ++x) {
                out.voxels.at(x, y, z) =
                    c.voxels.at(fx ? d.x - 1 - x : x, fy ? d.y - 1 - y : y, z);
            }
        }
    }
    return out;
}

Cuboid shift_cuboid(const Cuboid& c, int dx, int dy) {
    Cuboid out = c;
    const Vec3i d = c.voxels.dims();
    for (int z = 0; z < d.z; ++z) {
        for (int y = 0; y < d.y; ++y) {
            for (int x = 0; x < d.x; ++x) {
                const int sx = std::clamp(x - dx, 0, d.x - 1);
                const int sy = std::clamp(y - dy, 0, d.y - 1);
                out.voxels.at(x, y, z) = c.voxels.at(sx, sy, z);
            }
        }
    }
    return out;
}

Cuboid rotate_cuboid_z(const Cuboid& c, double degrees) {
    Cuboid out = c;
    const Vec3i d = c.voxels.dims();
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);
    const double cx = (d.x - 1) / 2.0;
    const double cy = (d.y - 1) / 2.0;
    std::vector<double> slice(static_cast<std::size_t>(d.x) * d.y);
    for (int z = 0; z < d.z; ++z) {
        for (int y = 0; y < d.y; ++y) {
            for (int x = 0; x < d.x; ++x) {
                slice[static_cast<std::size_t>(y) * d.x + x] = c.voxels.at(x, y, z);
            }
        }
        const Spline2d spline(slice.data(), d.x, d.y);
        for (int y = 0; y < d.y; ++y) {
            for (int x = 0; x < d.x; ++x) {
                // Inverse rotation of the output coordinate; sampling is
                // clamped to the slice domain.
                const double rx = x - cx;
                const double ry = y - cy;
                const double sx = cs * rx + sn * ry + cx;
                const double sy = -sn * rx + cs * ry + cy;
                out.voxels.at(x, y, z) = spline.eval(sx, sy);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Cuboid> augment(const Cuboid& cuboid) {
    const Vec3i d = cuboid.voxels.dims();
    if (d.x < 9 || d.y < 9) {
        throw TooSmall("augment: x/y extents must be at least 9 voxels");
    }
    std::vector<Cuboid> out;
    out.reserve(67);
    out.push_back(cuboid);
    out.push_back(flip_cuboid(cuboid, true, false));
    out.push_back(flip_cuboid(cuboid, false, true));
    out.push_back(flip_cuboid(cuboid, true, true));
    out.push_back(shift_cuboid(cuboid, 4, 0));
    out.push_back(shift_cuboid(cuboid, -4, 0));
    out.push_back(shift_cuboid(cuboid, 0, 4));
    out.push_back(shift_cuboid(cuboid, 0, -4));
    for (int k = 1; k <= 59; ++k) {
        out.push_back(rotate_cuboid_z(cuboid, 6.0 * k));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'F', 'G', 'A', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct Writer {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
            v >>= 8;
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
            v >>= 8;
        }
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u16(static_cast<std::uint16_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void tensor(const TensorT<float>& t) {
        u32(static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) i32(d);
        for (float v : t.data) f32(v);
    }
};

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (bytes.size() - pos < n) {
            throw CheckpointError("checkpoint: truncated");
        }
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(
            bytes[pos] | (static_cast<std::uint16_t>(bytes[pos + 1]) << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[pos + i];
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[pos + i];
        pos += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint16_t n = u16();
        need(n);
        std::string s(bytes.begin() + static_cast<long>(pos),
                      bytes.begin() + static_cast<long>(pos + n));
        pos += n;
        return s;
    }
    TensorT<float> tensor() {
        const std::uint32_t nd = u32();
        if (nd > 8) throw CheckpointError("checkpoint: absurd tensor rank");
        if (nd == 0) return {};
        std::vector<int> shape(nd);
        for (auto& d : shape) {
            d = i32();
            if (d <= 0 || d > (1 << 24)) {
                throw CheckpointError("checkpoint: bad tensor dim");
            }
        }
        TensorT<float> t(shape);
        for (auto& v : t.data) v = f32();
        return t;
    }
};

void write_net(Writer& w, const NetParamsT<float>& net,
               const std::vector<LayerSpec>& specs) {
    w.u32(static_cast<std::uint32_t>(net.blocks.size()));
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        w.str(specs[i].name);
        const auto& blk = net.blocks[i];
        if (blk.gamma.empty()) {
            w.u32(2);
            w.tensor(blk.w);
            w.tensor(blk.b);
        } else {
            w.u32(4);
            w.tensor(blk.w);
            w.tensor(blk.b);
            w.tensor(blk.gamma);
            w.tensor(blk.beta);
        }
    }
}

NetParamsT<float> read_net(Reader& r, const std::vector<LayerSpec>& specs,
                           const char* what) {
    const std::uint32_t count = r.u32();
    if (count != specs.size()) {
        throw CheckpointError(std::string("checkpoint: ") + what +
                              " layer count mismatch");
    }
    NetParamsT<float> net;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        if (name != specs[i].name) {
            throw CheckpointError(std::string("checkpoint: ") + what +
                                  " layer order mismatch at " + name);
        }
        const std::uint32_t tensors = r.u32();
        if (tensors != 2 && tensors != 4) {
            throw CheckpointError("checkpoint: bad tensor count per layer");
        }
        ParamBlockT<float> blk;
        blk.w = r.tensor();
        blk.b = r.tensor();
        if (tensors == 4) {
            blk.gamma = r.tensor();
            blk.beta = r.tensor();
        }
        net.blocks.push_back(std::move(blk));
    }
    return net;
}

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const GanModel& model) {
    model.generator.validate();
    model.discriminator.validate();
    if (!(model.generator.config == model.discriminator.config)) {
        throw CheckpointError("checkpoint: generator/discriminator configs differ");
    }
    Writer w;
    w.bytes.insert(w.bytes.end(), kCheckpointMagic, kCheckpointMagic + 8);
    w.u32(kCheckpointVersion);
    const auto& arch = model.generator.config;
    w.i32(arch.gen_base);
    w.i32(arch.disc_base);
    w.f64(arch.dropout_rate);
    const auto& tc = model.trained_with;
    w.i32(tc.epochs);
    w.i32(tc.batch_size);
    w.i32(tc.iterations);
    w.f64(tc.lr_gen);
    w.f64(tc.lr_disc);
    w.f64(tc.momentum);
    w.f64(tc.l1_weight);
    w.u64(tc.seed);
    write_net(w, model.generator.net, nn::generator_layout(arch));
    write_net(w, model.discriminator.net, nn::discriminator_layout(arch));
    return std::move(w.bytes);
}

GanModel load_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    r.need(12);
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw CheckpointError("checkpoint: bad magic");
    }
    r.pos = 8;
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint: unsupported version " +
                              std::to_string(version));
    }
    GanModel model;
    GanArchConfig arch;
    arch.gen_base = r.i32();
    arch.disc_base = r.i32();
    arch.dropout_rate = r.f64();
    if (arch.gen_base <= 0 || arch.disc_base <= 0) {
        throw CheckpointError("checkpoint: bad architecture config");
    }
    model.trained_with.arch = arch;
    model.trained_with.epochs = r.i32();
    model.trained_with.batch_size = r.i32();
    model.trained_with.iterations = r.i32();
    model.trained_with.lr_gen = r.f64();
    model.trained_with.lr_disc = r.f64();
    model.trained_with.momentum = r.f64();
    model.trained_with.l1_weight = r.f64();
    model.trained_with.seed = r.u64();

    model.generator.config = arch;
    model.generator.net = read_net(r, nn::generator_layout(arch), "generator");
    model.discriminator.config = arch;
    model.discriminator.net =
        read_net(r, nn::discriminator_layout(arch), "discriminator");
    if (r.pos != bytes.size()) {
        throw CheckpointError("checkpoint: trailing bytes");
    }
    model.generator.validate();
    model.discriminator.validate();
    return model;
}

void save_checkpoint_file(const GanModel& model, const std::string& path) {
    const auto bytes = save_checkpoint(model);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

GanModel load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

}  // namespace ctforge
