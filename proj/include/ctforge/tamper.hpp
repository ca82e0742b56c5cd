#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctforge/detector.hpp"
#include "ctforge/gan.hpp"
#include "ctforge/preprocess.hpp"
#include "ctforge/volume.hpp"

namespace ctforge {

struct TamperConfig {
    double alpha = 500.0;  // HU threshold between wanted and unwanted tissue
    double beta = 70.0;    // edge smoothness
    double noise_hu_ceiling = -600.0;
    int max_injections = 4;
    double removal_diameter_floor_mm = 3.0;
    int removal_iteration_cap = 16;
    std::string localization = "random-middle";
    int spline_order = 3;
    std::uint64_t seed = 1;
    // Oracle in-painter settings.
    double oracle_diameter_lo = 10.0;
    double oracle_diameter_hi = 14.0;
    double oracle_tissue_hu = -40.0;
    // Noise-level band of the scans splice templates are cut from.
    double splice_sigma_lo = 25.0;
    double splice_sigma_hi = 110.0;
};

struct TamperAction {
    std::string mode;  // inject | remove | splice
    Vec3i center{};
    Vec3i origin{};
    Vec3i extent{};
    double diameter_mm = 0.0;
    std::string pre_hash;
    std::string post_hash;
};

struct TamperRecord {
    std::vector<TamperAction> actions;

    std::string to_text() const;
    static TamperRecord from_text(const std::string& text);
};

// ---------------------------------------------------------------------------
// Weighting and merging
// ---------------------------------------------------------------------------

// Gaussian kernel over the extents, min-max normalized to [0, 1], with
// per-axis sigma of extent/4.
Grid3 gaussian_kernel_01(Vec3i extents);

// W(x) = sigmoid((x + alpha) / beta) * G(x), elementwise in [0, 1].
Grid3 compute_weight(const Grid3& x, double alpha, double beta);

// merge(x, y) = W(x) * x + (1 - W(x)) * y, with x the source and y the
// destination; a per-voxel convex combination.
Grid3 merge_cuboids(const Grid3& source, const Grid3& destination, double alpha,
                    double beta);

// Removal blending keys the weight on the destination tissue being replaced:
// W(y) * x + (1 - W(y)) * y. Weighting the source as in merge_cuboids is a
// no-op when the source is generated air.
Grid3 merge_for_removal(const Grid3& source, const Grid3& destination,
                        double alpha, double beta);

// Sample standard deviation of destination voxels below the HU ceiling; the
// clean noise estimate of the touch-up step. no_air is set (and 0 returned)
// when fewer than two voxels qualify.
double estimate_noise_sigma(const Grid3& destination, double hu_ceiling,
                            bool* no_air = nullptr);

// Adds Gaussian noise at the estimated sigma to the source, then merges.
enum class TamperMode { inject, remove };
Grid3 touch_up(const Grid3& source, const Grid3& destination,
               const TamperConfig& config, TamperMode mode, Rng& rng,
               bool* no_air = nullptr);

// ---------------------------------------------------------------------------
// Localization
// ---------------------------------------------------------------------------

// "random-middle": uniform draws inside fixed fractional boxes in the middle
// of the left/right halves, kept only when the local 5^3 mean HU is below
// -500. "detector": centers of detected nodules, largest first. Throws
// NoCandidates when the requested count cannot be produced.
std::vector<Vec3i> locate_candidates(const Volume& volume,
                                     const std::string& strategy, int count,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// In-painters
// ---------------------------------------------------------------------------

using Inpainter = std::function<Cube(const Cube& masked, const PreprocessContext&)>;

// Wraps a trained generator (eval mode).
Inpainter generator_inpainter(const GeneratorParams& params);

// Analytic stand-in: inject fills the mask with a soft sphere blended into
// shell statistics; remove fills it with resampled surrounding-air texture.
Inpainter oracle_inpainter(TamperMode mode, const TamperConfig& config,
                           std::uint64_t seed);

// Maps an HU value through the recorded equalization and normalization.
double forward_map_hu(double hu, const PreprocessContext& ctx);

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

struct TamperResult {
    Volume volume;
    TamperRecord record;
    bool iteration_cap_exceeded = false;
};

// Full injection process: localize, cut, preprocess, mask, in-paint,
// inverse-preprocess, touch-up, paste; repeats until max_injections succeed.
TamperResult inject(const Volume& volume, const Inpainter& inpainter,
                    const TamperConfig& config, std::uint64_t seed);

// Removal loop: detect, tamper the largest nodule, repeat until nothing
// above the diameter floor remains or the iteration cap trips (flagged in
// the result, partial record preserved).
TamperResult remove_nodules(const Volume& volume, const Inpainter& inpainter,
                            const TamperConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Baseline splice attack
// ---------------------------------------------------------------------------

struct SpliceTemplate {
    Grid3 voxels;  // 32^3 HU values
    Grid3 alpha;   // transparency channel from compute_weight
};

// Pre-cut nodule cuboids from independently generated phantoms (their noise
// level varies per template, as scans from different scanners would).
std::vector<SpliceTemplate> build_template_library(int n, const TamperConfig& config,
                                                   std::uint64_t seed);

// Pastes one template at a located candidate using its alpha channel as the
// blend weight. No in-painting, no context adaptation.
TamperResult splice_attack(const Volume& volume,
                           const std::vector<SpliceTemplate>& library,
                           const TamperConfig& config, std::uint64_t seed);

}  // namespace ctforge
