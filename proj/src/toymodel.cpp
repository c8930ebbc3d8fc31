#include "dvar/toymodel.hpp"

#include <cmath>
#include <numbers>

#include "dvar/common.hpp"

namespace dvar::toy {

namespace {

Mat random_matrix(std::size_t rows, std::size_t cols, double scale, RngStream& rng) {
    Mat out(rows, cols);
    for (double& x : out.data) {
        x = scale * rng.normal();
    }
    return out;
}

Vec random_vector(std::size_t n, double scale, RngStream& rng) {
    Vec out(n);
    for (double& x : out) {
        x = scale * rng.normal();
    }
    return out;
}

void validate(const WorldConfig& c) {
    if (c.latent_dim == 0 || c.image_dim == 0 || c.embed_dim == 0 || c.cond_dim == 0 ||
        c.hidden_dim == 0) {
        throw ConfigError("world dimensions must be positive");
    }
    if (c.time_feature_dim < 2 || c.time_feature_dim % 2 != 0) {
        throw ConfigError("time_feature_dim must be even and at least 2");
    }
    if (c.num_templates < 1) {
        throw ConfigError("world needs at least one caption template");
    }
    if (c.vocab_size < 2) {
        throw ConfigError("world vocabulary needs at least two entries");
    }
    if (c.num_images < 1) {
        throw ConfigError("world needs at least one reference image");
    }
    if (c.image_dim < c.latent_dim) {
        throw ConfigError("image_dim must be at least latent_dim for the encoder inverse");
    }
    if (c.encoder_sigma < 0.0 || c.caption_spread < 0.0 || c.data_spread < 0.0) {
        throw ConfigError("world noise scales must be nonnegative");
    }
}

// Jacobian block of the denoiser output with respect to input columns
// [col_start, col_start + col_count), at the linearization point whose hidden
// tanh outputs are `hidden`.
Mat jacobian_block(const FrozenWorld& world, const Vec& hidden, std::size_t col_start,
                   std::size_t col_count) {
    const std::size_t out_dim = world.layer2.rows;
    const std::size_t hidden_dim = world.layer2.cols;
    Mat jac(out_dim, col_count);
    for (std::size_t r = 0; r < hidden_dim; ++r) {
        const double gate = 1.0 - hidden[r] * hidden[r];
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double w2 = world.layer2(i, r) * gate;
            for (std::size_t c = 0; c < col_count; ++c) {
                jac(i, c) += w2 * world.layer1(r, col_start + c);
            }
        }
    }
    return jac;
}

Mat mat_transpose_times(const Mat& a, const Mat& b) {
    // a^T * b with a: n x p, b: n x q -> p x q
    if (a.rows != b.rows) {
        throw InputError("mat_transpose_times: row mismatch");
    }
    Mat out(a.cols, b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double av = a(r, i);
            if (av == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < b.cols; ++j) {
                out(i, j) += av * b(r, j);
            }
        }
    }
    return out;
}

// A fixed draw from the training input distribution with latents resolved,
// used to define the reference objective the hidden target is tuned against.
struct CalibrationSet {
    std::vector<std::size_t> captions;
    std::vector<std::size_t> timesteps;
    std::vector<Vec> noisy_latents;
    std::vector<Vec> noise;
};

CalibrationSet sample_calibration(const FrozenWorld& world, std::size_t count, RngStream& rng) {
    CalibrationSet set;
    const std::size_t m = world.config.latent_dim;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t image = rng.uniform_below(world.images.size());
        set.captions.push_back(rng.uniform_below(world.config.num_templates));
        const Vec encoder_noise = rng.normal_vector(m);
        const std::size_t t = rng.uniform_below(world.config.num_timesteps);
        Vec diffusion_noise = rng.normal_vector(m);
        const Vec latent = encode(world, world.images[image], encoder_noise);
        set.noisy_latents.push_back(
            diffusion::forward_process(latent, diffusion_noise, t, world.schedule));
        set.timesteps.push_back(t);
        set.noise.push_back(std::move(diffusion_noise));
    }
    return set;
}

double calibration_loss_grad(const FrozenWorld& world, const CalibrationSet& set,
                             const Vec& embedding, Vec* grad) {
    const std::size_t m = world.config.latent_dim;
    double loss = 0.0;
    if (grad != nullptr) {
        grad->assign(embedding.size(), 0.0);
    }
    for (std::size_t i = 0; i < set.noise.size(); ++i) {
        const Vec condition = caption_embed(world, set.captions[i], embedding);
        DenoiserActivations acts;
        const Vec pred = denoise_forward(world, set.noisy_latents[i], condition,
                                         set.timesteps[i], grad != nullptr ? &acts : nullptr);
        Vec out_grad(m);
        double sq = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double diff = pred[k] - set.noise[i][k];
            sq += diff * diff;
            out_grad[k] = 2.0 * diff / static_cast<double>(m);
        }
        loss += sq / static_cast<double>(m);
        if (grad != nullptr) {
            const Vec cond_grad = denoise_backward(world, acts, out_grad);
            add_matvec_transpose(world.caption_maps[set.captions[i]], cond_grad, *grad);
        }
    }
    const double inv = 1.0 / static_cast<double>(set.noise.size());
    loss *= inv;
    if (grad != nullptr) {
        for (double& g : *grad) {
            g *= inv;
        }
    }
    return loss;
}

// Damped Newton steps on the reference objective, with the Hessian taken by
// central differences of the analytic gradient. The landscape is close to
// quadratic at the default weight scale, so a handful of iterations land on
// the minimizer.
Vec polish_embedding(const FrozenWorld& world, Vec embedding, const Vec& ridge) {
    RngStream rng(derive_seed(world.master_seed, "polish"));
    const CalibrationSet set = sample_calibration(world, 512, rng);
    const std::size_t d = embedding.size();
    const auto objective = [&](const Vec& v, Vec* grad) {
        double value = calibration_loss_grad(world, set, v, grad);
        for (std::size_t i = 0; i < v.size(); ++i) {
            value += 0.5 * ridge[i] * v[i] * v[i];
            if (grad != nullptr) {
                (*grad)[i] += ridge[i] * v[i];
            }
        }
        return value;
    };
    double loss = objective(embedding, nullptr);
    for (int iter = 0; iter < 8; ++iter) {
        Vec grad;
        objective(embedding, &grad);
        Mat hessian(d, d);
        for (std::size_t k = 0; k < d; ++k) {
            const double h = 1e-4 * (1.0 + std::fabs(embedding[k]));
            Vec plus = embedding;
            plus[k] += h;
            Vec minus = embedding;
            minus[k] -= h;
            Vec grad_plus;
            Vec grad_minus;
            objective(plus, &grad_plus);
            objective(minus, &grad_minus);
            for (std::size_t r = 0; r < d; ++r) {
                hessian(r, k) = (grad_plus[r] - grad_minus[r]) / (2.0 * h);
            }
        }
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t k = r + 1; k < d; ++k) {
                const double sym = 0.5 * (hessian(r, k) + hessian(k, r));
                hessian(r, k) = sym;
                hessian(k, r) = sym;
            }
        }
        double damping = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
            damping += std::fabs(hessian(r, r));
        }
        damping = std::max(1e-8, 1e-4 * damping / static_cast<double>(d));
        bool moved = false;
        for (int attempt = 0; attempt < 6 && !moved; ++attempt) {
            Mat damped = hessian;
            for (std::size_t r = 0; r < d; ++r) {
                damped(r, r) += damping;
            }
            Vec step;
            try {
                step = solve_linear(damped, grad);
            } catch (const InputError&) {
                damping *= 10.0;
                continue;
            }
            Vec candidate = embedding;
            axpy(-1.0, step, candidate);
            const double candidate_loss = objective(candidate, nullptr);
            if (candidate_loss <= loss) {
                embedding = std::move(candidate);
                const bool converged = loss - candidate_loss < 1e-14;
                loss = candidate_loss;
                moved = true;
                if (converged) {
                    return embedding;
                }
            } else {
                damping *= 10.0;
            }
        }
        if (!moved) {
            break;
        }
    }
    return embedding;
}

// Per-coordinate standard deviation of the stochastic batch gradient at the
// given embedding, over fresh draws from the training input distribution.
Vec estimate_gradient_noise(const FrozenWorld& world, const Vec& embedding,
                            std::size_t batch_size, std::size_t batches) {
    RngStream rng(derive_seed(world.master_seed, "noisescale"));
    const std::size_t d = embedding.size();
    Vec mean(d, 0.0);
    Vec second(d, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        const CalibrationSet set = sample_calibration(world, batch_size, rng);
        Vec grad;
        calibration_loss_grad(world, set, embedding, &grad);
        for (std::size_t i = 0; i < d; ++i) {
            mean[i] += grad[i];
            second[i] += grad[i] * grad[i];
        }
    }
    Vec sigma(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        mean[i] /= static_cast<double>(batches);
        const double var = second[i] / static_cast<double>(batches) - mean[i] * mean[i];
        sigma[i] = std::sqrt(std::max(0.0, var));
    }
    return sigma;
}

// Places the mean dataset latent so that (a) the quadratic model of the
// objective around the target condition is stationary in the embedding at
// the hidden target and (b) the latent stays close to the direction that
// one-step denoising at the target condition produces. (a) constrains only
// embed_dim directions; (b) resolves the leftover freedom.
Vec calibrate_mean_latent(const FrozenWorld& world, const Vec& target_condition,
                          const Vec& ideal_latent) {
    const auto& cfg = world.config;
    const std::size_t m = cfg.latent_dim;
    const std::size_t d = cfg.embed_dim;
    const std::size_t dc = cfg.cond_dim;
    const std::size_t grid_step = std::max<std::size_t>(1, cfg.num_timesteps / 64);

    Vec mean_latent(m, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
        // Operating point: the signal component of a typical noisy latent.
        double sqrt_ab_mean = 0.0;
        std::size_t grid_count = 0;
        for (std::size_t t = 0; t < cfg.num_timesteps; t += grid_step) {
            sqrt_ab_mean += std::sqrt(world.schedule.alpha_bars[t]);
            ++grid_count;
        }
        sqrt_ab_mean /= static_cast<double>(grid_count);
        Vec z_op(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            z_op[i] = sqrt_ab_mean * mean_latent[i];
        }

        Mat sqp(dc, m);      // sum over grid of sqrt(alpha_bar) * Q^T P
        Mat sqq(dc, dc);     // sum of Q^T Q
        Vec sqr(dc, 0.0);    // sum of Q^T rho(t)
        for (std::size_t t = 0; t < cfg.num_timesteps; t += grid_step) {
            DenoiserActivations acts;
            const Vec out = denoise_forward(world, z_op, target_condition, t, &acts);
            const Mat p = jacobian_block(world, acts.hidden, 0, m);
            const Mat q = jacobian_block(world, acts.hidden, m, dc);
            Vec rho = out;
            const Vec pz = matvec(p, z_op);
            const Vec qc = matvec(q, target_condition);
            for (std::size_t i = 0; i < m; ++i) {
                rho[i] -= pz[i] + qc[i];
            }
            const double w = std::sqrt(world.schedule.alpha_bars[t]);
            const Mat qtp = mat_transpose_times(q, p);
            for (std::size_t i = 0; i < dc * m; ++i) {
                sqp.data[i] += w * qtp.data[i];
            }
            const Mat qtq = mat_transpose_times(q, q);
            for (std::size_t i = 0; i < dc * dc; ++i) {
                sqq.data[i] += qtq.data[i];
            }
            add_matvec_transpose(q, rho, sqr);
        }
        const double inv_grid = 1.0 / static_cast<double>(grid_count);

        // Stationarity of the averaged quadratic model at the hidden target:
        //   sum_j A_j^T [ E(sqrt(ab) Q^T P) z + E(Q^T Q) c_j + E(Q^T rho) ] = 0
        Mat constraint(d, m);  // sum_j A_j^T * mean(sqrt(ab) Q^T P)
        Vec offset(d, 0.0);    // sum_j A_j^T * [mean(Q^T Q) c_j + mean(Q^T rho)]
        for (std::size_t j = 0; j < cfg.num_templates; ++j) {
            const Mat& a = world.caption_maps[j];
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t k = 0; k < m; ++k) {
                    double acc = 0.0;
                    for (std::size_t r = 0; r < dc; ++r) {
                        acc += a(r, i) * sqp(r, k);
                    }
                    constraint(i, k) += acc * inv_grid;
                }
            }
            Vec cond_j = matvec(a, world.hidden_target);
            for (std::size_t r = 0; r < dc; ++r) {
                cond_j[r] += world.caption_offsets[j][r];
            }
            Vec inner(dc, 0.0);
            for (std::size_t r = 0; r < dc; ++r) {
                double acc = sqr[r];
                for (std::size_t s = 0; s < dc; ++s) {
                    acc += sqq(r, s) * cond_j[s];
                }
                inner[r] = acc * inv_grid;
            }
            add_matvec_transpose(a, inner, offset);
        }

        // Project ideal_latent onto the constraint subspace:
        //   z = ideal + C^T (C C^T)^{-1} (-offset - C ideal)
        Mat gram(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    acc += constraint(i, k) * constraint(j, k);
                }
                gram(i, j) = acc;
            }
        }
        Vec rhs = matvec(constraint, ideal_latent);
        for (std::size_t i = 0; i < d; ++i) {
            rhs[i] = -offset[i] - rhs[i];
        }
        const Vec multipliers = solve_linear(gram, rhs);
        mean_latent = ideal_latent;
        add_matvec_transpose(constraint, multipliers, mean_latent);
    }
    return mean_latent;
}

}  // namespace

FrozenWorld build_world(const WorldConfig& config, std::uint64_t master_seed) {
    validate(config);
    FrozenWorld world;
    world.config = config;
    world.master_seed = master_seed;
    world.schedule =
        diffusion::make_schedule(config.num_timesteps, config.beta_start, config.beta_end);

    const std::size_t m = config.latent_dim;
    const std::size_t d = config.embed_dim;
    const std::size_t dc = config.cond_dim;
    const std::size_t dt = config.time_feature_dim;
    const std::size_t input_dim = m + dc + dt;

    RngStream net_rng(derive_seed(master_seed, "denoiser"));
    const double input_scale =
        config.weight_scale / std::sqrt(static_cast<double>(input_dim));
    world.layer1 = random_matrix(config.hidden_dim, input_dim, input_scale, net_rng);
    for (std::size_t r = 0; r < config.hidden_dim; ++r) {
        for (std::size_t c = m; c < m + dc; ++c) {
            world.layer1(r, c) *= config.condition_gain;
        }
        for (std::size_t c = m + dc; c < input_dim; ++c) {
            world.layer1(r, c) *= config.time_feature_gain;
        }
    }
    world.bias1 = random_vector(config.hidden_dim, 0.1, net_rng);
    world.layer2 = random_matrix(m, config.hidden_dim,
                                 1.0 / std::sqrt(static_cast<double>(config.hidden_dim)),
                                 net_rng);
    world.bias2 = random_vector(m, 0.1, net_rng);

    RngStream caption_rng(derive_seed(master_seed, "captions"));
    const double embed_scale = 1.0 / std::sqrt(static_cast<double>(d));
    const Mat caption_base = random_matrix(dc, d, embed_scale, caption_rng);
    world.caption_maps.reserve(config.num_templates);
    world.caption_offsets.reserve(config.num_templates);
    for (std::size_t j = 0; j < config.num_templates; ++j) {
        Mat a = random_matrix(dc, d, config.caption_spread * embed_scale, caption_rng);
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            a.data[i] += caption_base.data[i];
        }
        world.caption_maps.push_back(std::move(a));
        world.caption_offsets.push_back(random_vector(dc, config.caption_spread, caption_rng));
    }

    RngStream encoder_rng(derive_seed(master_seed, "encoder"));
    world.encoder_map = random_matrix(m, config.image_dim,
                                      1.0 / std::sqrt(static_cast<double>(config.image_dim)),
                                      encoder_rng);

    RngStream vocab_rng(derive_seed(master_seed, "vocabulary"));
    world.vocabulary.reserve(config.vocab_size);
    for (std::size_t k = 0; k < config.vocab_size; ++k) {
        world.vocabulary.push_back(random_vector(d, config.vocab_scale, vocab_rng));
    }
    RngStream target_rng(derive_seed(master_seed, "target"));
    world.hidden_target = random_vector(d, 1.0, target_rng);

    // Target condition averaged over templates.
    Vec target_condition(dc, 0.0);
    for (std::size_t j = 0; j < config.num_templates; ++j) {
        Vec cj = matvec(world.caption_maps[j], world.hidden_target);
        for (std::size_t i = 0; i < dc; ++i) {
            target_condition[i] += (cj[i] + world.caption_offsets[j][i]);
        }
    }
    for (double& x : target_condition) {
        x /= static_cast<double>(config.num_templates);
    }

    // Mean one-step sample direction at the target condition, estimated over
    // a fixed probe set; the dataset mean is pulled toward it so the
    // observational scorer sees reference latents near the model's own
    // samples for the target.
    RngStream probe_rng(derive_seed(master_seed, "calibration"));
    const std::size_t mid_t = config.num_timesteps / 2;
    const double ab_mid = world.schedule.alpha_bars[mid_t];
    Vec mean_sample(m, 0.0);
    constexpr std::size_t probe_count = 64;
    for (std::size_t s = 0; s < probe_count; ++s) {
        const Vec probe = probe_rng.normal_vector(m);
        const Vec pred = denoise_forward(world, probe, target_condition, mid_t);
        for (std::size_t i = 0; i < m; ++i) {
            mean_sample[i] += (probe[i] - std::sqrt(1.0 - ab_mid) * pred[i]) / std::sqrt(ab_mid);
        }
    }
    Vec ideal_latent(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        ideal_latent[i] = config.data_alignment * mean_sample[i] / static_cast<double>(probe_count);
    }

    const Vec mean_latent = calibrate_mean_latent(world, target_condition, ideal_latent);

    // Per-image variation, centered so the dataset mean is exactly the
    // calibrated latent.
    RngStream data_rng(derive_seed(master_seed, "data"));
    std::vector<Vec> variations;
    variations.reserve(config.num_images);
    Vec variation_mean(m, 0.0);
    for (std::size_t i = 0; i < config.num_images; ++i) {
        variations.push_back(data_rng.normal_vector(m));
        axpy(1.0 / static_cast<double>(config.num_images), variations.back(), variation_mean);
    }

    // Pseudo-inverse of the encoder map: image = E^T (E E^T)^{-1} latent.
    Mat gram(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < config.image_dim; ++k) {
                acc += world.encoder_map(i, k) * world.encoder_map(j, k);
            }
            gram(i, j) = acc;
        }
    }
    world.images.reserve(config.num_images);
    world.reference_latents.reserve(config.num_images);
    for (std::size_t i = 0; i < config.num_images; ++i) {
        Vec latent = mean_latent;
        for (std::size_t k = 0; k < m; ++k) {
            latent[k] += config.data_spread * (variations[i][k] - variation_mean[k]);
        }
        const Vec weights = solve_linear(gram, latent);
        Vec image(config.image_dim, 0.0);
        add_matvec_transpose(world.encoder_map, weights, image);
        world.reference_latents.push_back(matvec(world.encoder_map, image));
        world.images.push_back(std::move(image));
    }

    // The dataset calibration leaves the target approximately stationary. Move
    // it the rest of the way onto the fixed point the training dynamics settle
    // at: first a uniformly regularized polish to reach the basin, then a
    // second polish whose per-coordinate ridge mirrors the contraction a
    // decay-coupled optimizer applies (decay times gradient-noise scale).
    const std::size_t d_embed = config.embed_dim;
    const Vec uniform_ridge(d_embed, config.target_regularization * 0.03);
    const Vec staged = polish_embedding(world, world.hidden_target, uniform_ridge);
    const Vec noise_scale = estimate_gradient_noise(world, staged, 4, 160);
    Vec matched_ridge(d_embed, 0.0);
    for (std::size_t i = 0; i < d_embed; ++i) {
        matched_ridge[i] = config.target_regularization * noise_scale[i];
    }
    world.hidden_target = polish_embedding(world, staged, matched_ridge);
    return world;
}

Vec encode(const FrozenWorld& world, const Vec& image, const Vec& noise) {
    Vec latent = matvec(world.encoder_map, image);
    if (noise.size() != latent.size()) {
        throw InputError("encode: noise size must match latent_dim");
    }
    axpy(world.config.encoder_sigma, noise, latent);
    return latent;
}

Vec caption_embed(const FrozenWorld& world, std::size_t index, const Vec& embedding) {
    if (index >= world.caption_maps.size()) {
        throw InputError("caption template index out of range");
    }
    Vec condition = matvec(world.caption_maps[index], embedding);
    for (std::size_t i = 0; i < condition.size(); ++i) {
        condition[i] += world.caption_offsets[index][i];
    }
    return condition;
}

Vec time_features(const WorldConfig& config, std::size_t timestep) {
    Vec features(config.time_feature_dim);
    const double phase = static_cast<double>(timestep) / static_cast<double>(config.num_timesteps);
    double frequency = 2.0 * std::numbers::pi;
    for (std::size_t k = 0; k < config.time_feature_dim / 2; ++k) {
        features[2 * k] = std::sin(frequency * phase);
        features[2 * k + 1] = std::cos(frequency * phase);
        frequency *= 2.0;
    }
    return features;
}

Vec denoise_forward(const FrozenWorld& world, const Vec& noisy_latent, const Vec& condition,
                    std::size_t timestep, DenoiserActivations* activations) {
    const auto& cfg = world.config;
    if (noisy_latent.size() != cfg.latent_dim || condition.size() != cfg.cond_dim) {
        throw InputError("denoise_forward: input shape mismatch");
    }
    if (timestep >= cfg.num_timesteps) {
        throw InputError("denoise_forward: timestep out of range");
    }
    Vec input;
    input.reserve(cfg.latent_dim + cfg.cond_dim + cfg.time_feature_dim);
    input.insert(input.end(), noisy_latent.begin(), noisy_latent.end());
    input.insert(input.end(), condition.begin(), condition.end());
    const Vec tau = time_features(cfg, timestep);
    input.insert(input.end(), tau.begin(), tau.end());

    Vec hidden = matvec(world.layer1, input);
    for (std::size_t r = 0; r < hidden.size(); ++r) {
        hidden[r] = std::tanh(hidden[r] + world.bias1[r]);
    }
    Vec out = matvec(world.layer2, hidden);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += world.bias2[i];
    }
    if (activations != nullptr) {
        activations->input = std::move(input);
        activations->hidden = std::move(hidden);
    }
    return out;
}

Vec denoise_backward(const FrozenWorld& world, const DenoiserActivations& activations,
                     const Vec& output_gradient) {
    const auto& cfg = world.config;
    const std::size_t input_dim = cfg.latent_dim + cfg.cond_dim + cfg.time_feature_dim;
    if (activations.input.size() != input_dim || activations.hidden.size() != cfg.hidden_dim) {
        throw InputError("denoise_backward: activations do not match this world");
    }
    if (output_gradient.size() != cfg.latent_dim) {
        throw InputError("denoise_backward: output gradient shape mismatch");
    }
    Vec hidden_grad(cfg.hidden_dim, 0.0);
    add_matvec_transpose(world.layer2, output_gradient, hidden_grad);
    for (std::size_t r = 0; r < cfg.hidden_dim; ++r) {
        const double h = activations.hidden[r];
        hidden_grad[r] *= 1.0 - h * h;
    }
    Vec input_grad(input_dim, 0.0);
    add_matvec_transpose(world.layer1, hidden_grad, input_grad);
    return Vec(input_grad.begin() + static_cast<std::ptrdiff_t>(cfg.latent_dim),
               input_grad.begin() + static_cast<std::ptrdiff_t>(cfg.latent_dim + cfg.cond_dim));
}

std::string score_kind_name(ScoreKind kind) {
    return kind == ScoreKind::oracle_cosine ? "oracle_cosine" : "sample_similarity";
}

ScoreKind score_kind_from_name(const std::string& name) {
    if (name == "oracle_cosine") {
        return ScoreKind::oracle_cosine;
    }
    if (name == "sample_similarity") {
        return ScoreKind::sample_similarity;
    }
    throw ConfigError("unknown score kind: " + name);
}

Scorer::Scorer(const FrozenWorld& world, ScoreKind kind) : kind_(kind) {
    if (kind_ == ScoreKind::sample_similarity) {
        RngStream bank_rng(derive_seed(world.master_seed, "scorebank"));
        constexpr std::size_t bank_size = 8;
        noise_bank_.reserve(bank_size);
        for (std::size_t i = 0; i < bank_size; ++i) {
            noise_bank_.push_back(bank_rng.normal_vector(world.config.latent_dim));
        }
        sample_timestep_ = world.config.num_timesteps / 2;
    }
}

double Scorer::operator()(const FrozenWorld& world, const Vec& embedding) const {
    if (kind_ == ScoreKind::oracle_cosine) {
        return cosine(embedding, world.hidden_target);
    }
    const double alpha_bar = world.schedule.alpha_bars[sample_timestep_];
    const double signal_scale = std::sqrt(alpha_bar);
    const double noise_scale = std::sqrt(1.0 - alpha_bar);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t k = 0; k < noise_bank_.size(); ++k) {
        const std::size_t caption = k % world.config.num_templates;
        const Vec condition = caption_embed(world, caption, embedding);
        const Vec pred = denoise_forward(world, noise_bank_[k], condition, sample_timestep_);
        Vec sample(noise_bank_[k].size());
        for (std::size_t i = 0; i < sample.size(); ++i) {
            sample[i] = (noise_bank_[k][i] - noise_scale * pred[i]) / signal_scale;
        }
        for (const Vec& reference : world.reference_latents) {
            total += cosine(sample, reference);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

std::string init_kind_name(InitKind kind) {
    switch (kind) {
        case InitKind::best: return "best";
        case InitKind::manual: return "manual";
        case InitKind::random: return "random";
    }
    return "unknown";
}

InitKind init_kind_from_name(const std::string& name) {
    if (name == "best") {
        return InitKind::best;
    }
    if (name == "manual") {
        return InitKind::manual;
    }
    if (name == "random") {
        return InitKind::random;
    }
    throw ConfigError("unknown init strategy: " + name);
}

Vec select_init(const FrozenWorld& world, const InitStrategy& strategy, const Scorer& scorer,
                RngStream& rng) {
    switch (strategy.kind) {
        case InitKind::best: {
            std::size_t best_index = 0;
            double best_score = scorer(world, world.vocabulary[0]);
            for (std::size_t k = 1; k < world.vocabulary.size(); ++k) {
                const double s = scorer(world, world.vocabulary[k]);
                if (s > best_score) {
                    best_score = s;
                    best_index = k;
                }
            }
            return world.vocabulary[best_index];
        }
        case InitKind::manual:
            if (strategy.manual_index >= world.vocabulary.size()) {
                throw ConfigError("manual init index out of range");
            }
            return world.vocabulary[strategy.manual_index];
        case InitKind::random:
            return world.vocabulary[rng.uniform_below(world.vocabulary.size())];
    }
    throw ConfigError("unknown init strategy");
}

}  // namespace dvar::toy
