#pragma once

#include "dvar/diffusion.hpp"
#include "dvar/rng.hpp"
#include "dvar/toymodel.hpp"

namespace dvar::objective {

/// Samples every factor of an evaluation batch once. The mask records which
/// factors later evaluations reuse verbatim versus resample.
diffusion::EvalBatch make_eval_batch(const toy::FrozenWorld& world, std::size_t batch_size,
                                     const diffusion::FixedMask& fixed, RngStream& rng);

/// Materializes a batch against the world: fixed factors are read from the
/// stored batch, unfixed ones drawn from `rng` (required iff any factor is
/// unfixed). Resampling images also resamples their encoder noise, since a
/// latent belongs to the image it encodes. Conditions are built for the given
/// embedding.
diffusion::ResolvedBatch resolve_batch(const toy::FrozenWorld& world,
                                       const diffusion::EvalBatch& batch, const Vec& embedding,
                                       RngStream* rng);

/// Wraps the world's denoiser for ldm_loss (the sample index is unused).
diffusion::Denoiser toy_denoiser(const toy::FrozenWorld& world);

/// Objective value on the stored evaluation batch. With a fully fixed mask
/// this is a deterministic function of the embedding.
double det_loss(const toy::FrozenWorld& world, const diffusion::EvalBatch& batch,
                const Vec& embedding, RngStream* rng = nullptr);

struct LossGrad {
    double loss = 0.0;
    Vec grad;
};

/// Loss and its exact gradient with respect to the embedding on an already
/// resolved batch. Conditions are rebuilt for the embedding argument, so the
/// same batch can be differentiated at several points.
LossGrad loss_and_gradient(const toy::FrozenWorld& world, const diffusion::ResolvedBatch& batch,
                           const Vec& embedding);

}  // namespace dvar::objective
