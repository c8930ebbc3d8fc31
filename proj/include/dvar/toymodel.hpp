#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvar/diffusion.hpp"
#include "dvar/linalg.hpp"
#include "dvar/rng.hpp"

namespace dvar::toy {

struct WorldConfig {
    std::size_t latent_dim = 16;
    std::size_t image_dim = 32;
    std::size_t embed_dim = 8;
    std::size_t cond_dim = 16;
    std::size_t hidden_dim = 64;
    std::size_t num_templates = 10;
    std::size_t vocab_size = 128;
    std::size_t num_images = 5;
    std::size_t time_feature_dim = 8;  // even
    std::size_t num_timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    double encoder_sigma = 0.05;
    // Norm scale of vocabulary embeddings; sets how far training starts from
    // the target.
    double vocab_scale = 0.6;
    // Per-template deviation from the shared caption map; small values keep
    // caption resampling a mild noise source.
    double caption_spread = 0.035;
    // Standard deviation of per-image latent variation around the dataset mean.
    double data_spread = 0.25;
    // Scale applied to the time-feature columns of the first denoiser layer;
    // controls how strongly the loss depends on the sampled timestep.
    double time_feature_gain = 12.0;
    // Scale applied to the condition columns of the first denoiser layer;
    // controls how strongly the embedding moves the loss.
    double condition_gain = 3.0;
    // Overall scale of the first denoiser layer. Keeps pre-activations in the
    // quasi-linear tanh range so the objective stays well conditioned in the
    // embedding.
    double weight_scale = 0.55;
    // How far the dataset mean latent is pulled toward the direction that the
    // frozen denoiser associates with the target condition (keeps generated
    // samples and reference latents aligned for the observational scorer).
    double data_alignment = 2.0;
    // Defines the hidden target as the minimizer of the reference objective
    // under a per-coordinate ridge of (this value) x (gradient noise scale).
    // Mirrors the decoupled weight decay of the default training optimizer,
    // so training settles at the target instead of drifting along loss-flat
    // directions.
    double target_regularization = 2.0;
};

/// All immutable state of the testbed, bit-reproducible from (config, seed).
/// `hidden_target` is the concept the dataset was built around; training-side
/// code must never read it — it exists for oracle scoring and acceptance
/// checks only.
struct FrozenWorld {
    WorldConfig config;
    std::uint64_t master_seed = 0;
    diffusion::DiffusionSchedule schedule;

    // Two-layer tanh denoiser over [latent; condition; time features].
    Mat layer1;
    Vec bias1;
    Mat layer2;
    Vec bias2;

    // Caption templates: condition = caption_maps[j] * embedding + caption_offsets[j].
    std::vector<Mat> caption_maps;
    std::vector<Vec> caption_offsets;

    Mat encoder_map;  // latent_dim x image_dim

    std::vector<Vec> vocabulary;
    Vec hidden_target;

    std::vector<Vec> images;             // image_dim each
    std::vector<Vec> reference_latents;  // clean encodings of `images`
};

FrozenWorld build_world(const WorldConfig& config, std::uint64_t master_seed);

/// Stochastic encoder: latent = encoder_map * image + encoder_sigma * noise.
Vec encode(const FrozenWorld& world, const Vec& image, const Vec& noise);

/// Condition vector for caption template `index` (0-based) and embedding.
Vec caption_embed(const FrozenWorld& world, std::size_t index, const Vec& embedding);

/// Sinusoidal features of t / num_timesteps, geometric frequency ladder.
Vec time_features(const WorldConfig& config, std::size_t timestep);

/// Intermediate values kept from a forward pass for the exact backward pass.
struct DenoiserActivations {
    Vec input;   // [latent; condition; time features]
    Vec hidden;  // tanh outputs
};

Vec denoise_forward(const FrozenWorld& world, const Vec& noisy_latent, const Vec& condition,
                    std::size_t timestep, DenoiserActivations* activations = nullptr);

/// Gradient of the loss with respect to the condition input, given the
/// gradient with respect to the denoiser output and the activations of the
/// matching forward call.
Vec denoise_backward(const FrozenWorld& world, const DenoiserActivations& activations,
                     const Vec& output_gradient);

enum class ScoreKind { oracle_cosine, sample_similarity };

std::string score_kind_name(ScoreKind kind);
ScoreKind score_kind_from_name(const std::string& name);

/// Image-similarity surrogate. oracle_cosine compares the embedding directly
/// against the hidden target (evaluation-only). sample_similarity generates 8
/// one-step denoised samples from a fixed noise bank and scores their mean
/// cosine similarity to the reference latents; it never touches the target.
class Scorer {
public:
    Scorer(const FrozenWorld& world, ScoreKind kind);

    double operator()(const FrozenWorld& world, const Vec& embedding) const;
    ScoreKind kind() const { return kind_; }

private:
    ScoreKind kind_;
    std::vector<Vec> noise_bank_;
    std::size_t sample_timestep_ = 0;
};

enum class InitKind { best, manual, random };

struct InitStrategy {
    InitKind kind = InitKind::random;
    std::size_t manual_index = 0;
};

std::string init_kind_name(InitKind kind);
InitKind init_kind_from_name(const std::string& name);

/// Starting embedding from the vocabulary pool: argmax of the scorer (ties ->
/// lowest index), a manual pick, or a uniform draw.
Vec select_init(const FrozenWorld& world, const InitStrategy& strategy, const Scorer& scorer,
                RngStream& rng);

}  // namespace dvar::toy
