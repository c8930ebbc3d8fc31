#include "dvar/diffusion.hpp"

#include <cmath>

#include "dvar/common.hpp"

namespace dvar::diffusion {

DiffusionSchedule make_schedule(std::size_t num_timesteps, double beta_start, double beta_end) {
    if (num_timesteps < 1) {
        throw ConfigError("schedule needs at least one timestep");
    }
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("schedule requires 0 < beta_start <= beta_end < 1");
    }
    DiffusionSchedule schedule;
    schedule.num_timesteps = num_timesteps;
    schedule.betas.resize(num_timesteps);
    schedule.alpha_bars.resize(num_timesteps);
    double cumulative = 1.0;
    for (std::size_t t = 0; t < num_timesteps; ++t) {
        const double frac = num_timesteps == 1
                                ? 0.0
                                : static_cast<double>(t) / static_cast<double>(num_timesteps - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        cumulative *= 1.0 - beta;
        schedule.betas[t] = beta;
        schedule.alpha_bars[t] = cumulative;
    }
    return schedule;
}

Vec forward_process(const Vec& latent, const Vec& noise, std::size_t timestep,
                    const DiffusionSchedule& schedule) {
    if (timestep >= schedule.num_timesteps) {
        throw InputError("timestep " + std::to_string(timestep) + " out of range [0, " +
                         std::to_string(schedule.num_timesteps) + ")");
    }
    if (latent.size() != noise.size()) {
        throw InputError("forward_process: latent and noise sizes differ");
    }
    const double alpha_bar = schedule.alpha_bars[timestep];
    const double signal_scale = std::sqrt(alpha_bar);
    const double noise_scale = std::sqrt(1.0 - alpha_bar);
    Vec out(latent.size());
    for (std::size_t i = 0; i < latent.size(); ++i) {
        out[i] = signal_scale * latent[i] + noise_scale * noise[i];
    }
    return out;
}

std::string factor_name(Factor factor) {
    switch (factor) {
        case Factor::images: return "images";
        case Factor::captions: return "captions";
        case Factor::encoder_noise: return "encoder_noise";
        case Factor::timesteps: return "timesteps";
        case Factor::diffusion_noise: return "diffusion_noise";
    }
    return "unknown";
}

Factor factor_from_name(const std::string& name) {
    for (const Factor factor : all_factors) {
        if (factor_name(factor) == name) {
            return factor;
        }
    }
    throw ConfigError("unknown randomness factor: " + name);
}

bool& FixedMask::flag(Factor factor) {
    switch (factor) {
        case Factor::images: return images;
        case Factor::captions: return captions;
        case Factor::encoder_noise: return encoder_noise;
        case Factor::timesteps: return timesteps;
        case Factor::diffusion_noise: break;
    }
    return diffusion_noise;
}

bool FixedMask::flag(Factor factor) const {
    return const_cast<FixedMask*>(this)->flag(factor);
}

double ldm_loss(const Denoiser& denoiser, const ResolvedBatch& batch) {
    const std::size_t batch_size = batch.noise.size();
    if (batch_size == 0) {
        throw InputError("ldm_loss: empty batch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < batch_size; ++i) {
        const Vec prediction =
            denoiser(i, batch.noisy_latents[i], batch.conditions[i], batch.timesteps[i]);
        const Vec& target = batch.noise[i];
        if (prediction.size() != target.size()) {
            throw InputError("ldm_loss: prediction and noise sizes differ");
        }
        double sq = 0.0;
        for (std::size_t k = 0; k < target.size(); ++k) {
            const double diff = target[k] - prediction[k];
            sq += diff * diff;
        }
        total += sq / static_cast<double>(target.size());
    }
    return total / static_cast<double>(batch_size);
}

}  // namespace dvar::diffusion
