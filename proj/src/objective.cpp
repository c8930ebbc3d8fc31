#include "dvar/objective.hpp"

#include <cmath>

#include "dvar/common.hpp"

namespace dvar::objective {

using diffusion::EvalBatch;
using diffusion::FixedMask;
using diffusion::ResolvedBatch;

EvalBatch make_eval_batch(const toy::FrozenWorld& world, std::size_t batch_size,
                          const FixedMask& fixed, RngStream& rng) {
    if (batch_size == 0) {
        throw ConfigError("eval batch size must be at least 1");
    }
    EvalBatch batch;
    batch.fixed = fixed;
    batch.image_indices.reserve(batch_size);
    batch.caption_indices.reserve(batch_size);
    batch.encoder_noise.reserve(batch_size);
    batch.timesteps.reserve(batch_size);
    batch.diffusion_noise.reserve(batch_size);
    const std::size_t latent_dim = world.config.latent_dim;
    for (std::size_t i = 0; i < batch_size; ++i) {
        batch.image_indices.push_back(rng.uniform_below(world.images.size()));
        batch.caption_indices.push_back(rng.uniform_below(world.config.num_templates));
        batch.encoder_noise.push_back(rng.normal_vector(latent_dim));
        batch.timesteps.push_back(rng.uniform_below(world.config.num_timesteps));
        batch.diffusion_noise.push_back(rng.normal_vector(latent_dim));
    }
    return batch;
}

ResolvedBatch resolve_batch(const toy::FrozenWorld& world, const EvalBatch& batch,
                            const Vec& embedding, RngStream* rng) {
    const std::size_t batch_size = batch.size();
    if (batch_size == 0) {
        throw InputError("resolve_batch: empty batch");
    }
    if (batch.caption_indices.size() != batch_size || batch.encoder_noise.size() != batch_size ||
        batch.timesteps.size() != batch_size || batch.diffusion_noise.size() != batch_size) {
        throw InputError("resolve_batch: inconsistent batch field lengths");
    }
    const FixedMask& fixed = batch.fixed;
    if (!fixed.all_fixed() && rng == nullptr) {
        throw InputError("resolve_batch: rng required when any factor is unfixed");
    }
    const std::size_t latent_dim = world.config.latent_dim;
    // A resampled image invalidates its stored encoder noise draw.
    const bool fresh_encoder_noise = !fixed.encoder_noise || !fixed.images;

    ResolvedBatch out;
    out.latents.reserve(batch_size);
    out.noisy_latents.reserve(batch_size);
    out.conditions.reserve(batch_size);
    out.noise.reserve(batch_size);
    out.timesteps.reserve(batch_size);
    out.caption_indices.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t image_index =
            fixed.images ? batch.image_indices[i] : rng->uniform_below(world.images.size());
        if (image_index >= world.images.size()) {
            throw InputError("resolve_batch: image index out of range");
        }
        const std::size_t caption_index = fixed.captions
                                              ? batch.caption_indices[i]
                                              : rng->uniform_below(world.config.num_templates);
        const Vec encoder_noise =
            fresh_encoder_noise ? rng->normal_vector(latent_dim) : batch.encoder_noise[i];
        const std::size_t timestep =
            fixed.timesteps ? batch.timesteps[i]
                            : rng->uniform_below(world.config.num_timesteps);
        Vec diffusion_noise =
            fixed.diffusion_noise ? batch.diffusion_noise[i] : rng->normal_vector(latent_dim);

        Vec latent = toy::encode(world, world.images[image_index], encoder_noise);
        out.noisy_latents.push_back(
            diffusion::forward_process(latent, diffusion_noise, timestep, world.schedule));
        out.latents.push_back(std::move(latent));
        out.conditions.push_back(toy::caption_embed(world, caption_index, embedding));
        out.noise.push_back(std::move(diffusion_noise));
        out.timesteps.push_back(timestep);
        out.caption_indices.push_back(caption_index);
    }
    return out;
}

diffusion::Denoiser toy_denoiser(const toy::FrozenWorld& world) {
    return [&world](std::size_t, const Vec& noisy_latent, const Vec& condition,
                    std::size_t timestep) {
        return toy::denoise_forward(world, noisy_latent, condition, timestep);
    };
}

double det_loss(const toy::FrozenWorld& world, const EvalBatch& batch, const Vec& embedding,
                RngStream* rng) {
    const ResolvedBatch resolved = resolve_batch(world, batch, embedding, rng);
    return diffusion::ldm_loss(toy_denoiser(world), resolved);
}

LossGrad loss_and_gradient(const toy::FrozenWorld& world, const ResolvedBatch& batch,
                           const Vec& embedding) {
    const std::size_t batch_size = batch.noise.size();
    if (batch_size == 0) {
        throw InputError("loss_and_gradient: empty batch");
    }
    const std::size_t latent_dim = world.config.latent_dim;
    LossGrad result;
    result.grad.assign(embedding.size(), 0.0);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const Vec condition = toy::caption_embed(world, batch.caption_indices[i], embedding);
        toy::DenoiserActivations acts;
        const Vec pred =
            toy::denoise_forward(world, batch.noisy_latents[i], condition, batch.timesteps[i],
                                 &acts);
        Vec output_grad(latent_dim);
        double sq = 0.0;
        for (std::size_t k = 0; k < latent_dim; ++k) {
            const double diff = pred[k] - batch.noise[i][k];
            sq += diff * diff;
            output_grad[k] = 2.0 * diff / static_cast<double>(latent_dim);
        }
        result.loss += sq / static_cast<double>(latent_dim);
        const Vec condition_grad = toy::denoise_backward(world, acts, output_grad);
        add_matvec_transpose(world.caption_maps[batch.caption_indices[i]], condition_grad,
                             result.grad);
    }
    const double inv_batch = 1.0 / static_cast<double>(batch_size);
    result.loss *= inv_batch;
    for (double& g : result.grad) {
        g *= inv_batch;
    }
    if (!std::isfinite(result.loss)) {
        throw InputError("loss_and_gradient: non-finite loss");
    }
    for (const double g : result.grad) {
        if (!std::isfinite(g)) {
            throw InputError("loss_and_gradient: non-finite gradient");
        }
    }
    return result;
}

}  // namespace dvar::objective
