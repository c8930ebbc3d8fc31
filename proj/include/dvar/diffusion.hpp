#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dvar/linalg.hpp"
#include "dvar/rng.hpp"

namespace dvar::diffusion {

/// Linear-beta noising schedule. alpha_bar[t] is the cumulative product of
/// (1 - beta[s]) for s <= t and decreases strictly from alpha_bar[0] < 1.
struct DiffusionSchedule {
    std::size_t num_timesteps = 0;
    Vec betas;
    Vec alpha_bars;
};

DiffusionSchedule make_schedule(std::size_t num_timesteps = 1000, double beta_start = 1e-4,
                                double beta_end = 2e-2);

/// z_t = sqrt(alpha_bar_t) * latent + sqrt(1 - alpha_bar_t) * noise
Vec forward_process(const Vec& latent, const Vec& noise, std::size_t timestep,
                    const DiffusionSchedule& schedule);

/// The five stochastic inputs of the objective.
enum class Factor { images, captions, encoder_noise, timesteps, diffusion_noise };

constexpr std::array<Factor, 5> all_factors = {Factor::images, Factor::captions,
                                               Factor::encoder_noise, Factor::timesteps,
                                               Factor::diffusion_noise};

std::string factor_name(Factor factor);
Factor factor_from_name(const std::string& name);

/// Per-factor flags; a fixed factor is read verbatim from the stored batch on
/// every evaluation, an unfixed one is freshly resampled.
struct FixedMask {
    bool images = true;
    bool captions = true;
    bool encoder_noise = true;
    bool timesteps = true;
    bool diffusion_noise = true;

    bool all_fixed() const {
        return images && captions && encoder_noise && timesteps && diffusion_noise;
    }
    bool& flag(Factor factor);
    bool flag(Factor factor) const;
};

/// A bundle of evaluation inputs sampled once and reused; the arguments of
/// the deterministic objective.
struct EvalBatch {
    std::vector<std::size_t> image_indices;
    std::vector<std::size_t> caption_indices;
    std::vector<Vec> encoder_noise;    // one latent-sized vector per sample
    std::vector<std::size_t> timesteps;
    std::vector<Vec> diffusion_noise;  // one latent-sized vector per sample
    FixedMask fixed;

    std::size_t size() const { return image_indices.size(); }
};

/// Batch with all inputs materialized against a world: encoded latents, their
/// noised versions, conditions, and the noise targets.
struct ResolvedBatch {
    std::vector<Vec> latents;        // z0 per sample
    std::vector<Vec> noisy_latents;  // z_t per sample
    std::vector<Vec> conditions;
    std::vector<Vec> noise;          // regression target per sample
    std::vector<std::size_t> timesteps;
    std::vector<std::size_t> caption_indices;
};

/// Denoiser evaluated per sample: (sample index, z_t, condition, t) -> prediction.
using Denoiser = std::function<Vec(std::size_t, const Vec&, const Vec&, std::size_t)>;

/// Mean over the batch of the per-coordinate mean squared error between the
/// injected noise and the denoiser prediction.
double ldm_loss(const Denoiser& denoiser, const ResolvedBatch& batch);

}  // namespace dvar::diffusion
