#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctforge/nn/net.hpp"
#include "ctforge/preprocess.hpp"
#include "ctforge/rng.hpp"
#include "ctforge/volume.hpp"

namespace ctforge {

using nn::GanArchConfig;

// Center-mask voxel band: indices in [8, 24) along every axis.
constexpr int kMaskLo = 8;
constexpr int kMaskHi = 24;
constexpr int kMaskVoxels =
    (kMaskHi - kMaskLo) * (kMaskHi - kMaskLo) * (kMaskHi - kMaskLo);

// Zeroes the central 16^3 region; the rest of the cube is untouched.
Cube mask_center(const Cube& cube);
bool in_mask(int x, int y, int z);

struct ParamCounts {
    std::size_t generator = 0;
    std::size_t discriminator = 0;
};

// Analytic parameter counts for a configuration; nothing is allocated.
ParamCounts count_parameters(const GanArchConfig& cfg);

struct GeneratorParams {
    GanArchConfig config;
    nn::NetParamsT<float> net;

    void validate() const;
};

struct DiscriminatorParams {
    GanArchConfig config;
    nn::NetParamsT<float> net;

    void validate() const;
};

GeneratorParams init_generator(const GanArchConfig& cfg, Rng& rng);
DiscriminatorParams init_discriminator(const GanArchConfig& cfg, Rng& rng);

enum class RunMode { train, eval };

// In-paints a masked, normalized cube. Train mode applies dropout and needs
// an RNG; eval mode is deterministic. Output values lie in [-1, 1].
Cube generator_forward(const Cube& masked, const GeneratorParams& params,
                       RunMode mode, Rng* rng = nullptr);

// Probability in [0, 1] that the candidate completion of the masked context
// is generated (label convention: 0 = real pair, 1 = generated pair).
double discriminator_forward(const Cube& context, const Cube& candidate,
                             const DiscriminatorParams& params);

struct TrainingSample {
    Cube x_r;       // normalized ground-truth cube
    Cube x_r_star;  // the same cube with the center 16^3 zeroed
};

TrainingSample make_training_sample(const Cube& normalized);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 50;
    // When > 0, run exactly this many batch iterations instead of
    // epochs * ceil(n / batch_size).
    int iterations = 0;
    double lr_gen = 0.05;
    double lr_disc = 0.02;
    double momentum = 0.9;
    double l1_weight = 100.0;
    std::uint64_t seed = 1;
    GanArchConfig arch = GanArchConfig::toy_scale();

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct IterationStats {
    double d_loss_real = 0.0;
    double d_loss_fake = 0.0;
    double g_adv = 0.0;
    double g_l1 = 0.0;
    // Eval-mode masked-region reconstruction error over the whole dataset,
    // measured after the iteration's updates.
    double recon_eval = 0.0;

    friend bool operator==(const IterationStats&, const IterationStats&) = default;
};

// Instrumentation for the training-loop contract tests.
struct TrainObserver {
    int d_updates = 0;
    int g_updates = 0;
    std::vector<float> d_before_gen_phase;
    std::vector<float> d_after_gen_phase;
};

struct TrainResult {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    std::vector<IterationStats> history;
};

// Adversarial training exactly per the three-phase recipe: (2a) update the
// discriminator on the real pair with label 0, (2b) on the generated pair
// with label 1, (3) update the generator through the frozen discriminator
// with label 0 plus a masked L1 reconstruction term. Fully deterministic
// given the seed.
TrainResult train(const std::vector<TrainingSample>& dataset,
                  const TrainConfig& config, TrainObserver* observer = nullptr);

// Eval-mode masked-region mean absolute error of the generator over a
// dataset.
double masked_reconstruction_error(const GeneratorParams& gen,
                                   const std::vector<TrainingSample>& dataset);

// Returns the original plus 66 variants: flips on x, y, and xy; +-4 voxel
// shifts along x and y; rotations about z from 6 to 354 degrees in 6-degree
// steps. Requires x/y extents of at least 9 voxels.
std::vector<Cuboid> augment(const Cuboid& cuboid);

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, config echo, per-layer shape table, and
// little-endian float32 payloads.
// ---------------------------------------------------------------------------

struct GanModel {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    TrainConfig trained_with;
};

std::vector<std::uint8_t> save_checkpoint(const GanModel& model);
GanModel load_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint_file(const GanModel& model, const std::string& path);
GanModel load_checkpoint_file(const std::string& path);

// Cube <-> tensor bridges (1, 32, 32, 32).
nn::TensorT<float> cube_to_tensor(const Cube& cube);
Cube tensor_to_cube(const nn::TensorT<float>& t, CubeStage stage);

}  // namespace ctforge
