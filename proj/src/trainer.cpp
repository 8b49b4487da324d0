// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "geomark/errors.hpp"
#include "geomark/geometry.hpp"
#include "geomark/metrics.hpp"
#include "geomark/rng.hpp"
#include "geomark/synth.hpp"
#include "geomark/util.hpp"
#include "geomark/version.hpp"

namespace geomark {

// ---------------------------------------------------------------------------
// Schedule.

double lr_factor(long step, int epoch, const LrSchedule& sched) {
    if (step < 0 || epoch < 0) {
        throw ParameterError("lr_factor: step and epoch must be nonnegative");
    }
    double warmup = 1.0;
    if (sched.warmup_steps > 0) {
        const double progress =
            static_cast<double>(std::min<long>(step, sched.warmup_steps)) /
            static_cast<double>(sched.warmup_steps);
        warmup = sched.warmup_start_factor + (1.0 - sched.warmup_start_factor) * progress;
    }
    double decay = 1.0;
    for (int milestone : sched.milestones) {
        if (milestone <= epoch) {
            decay *= sched.gamma;
        }
    }
    return warmup * decay;
}

// ---------------------------------------------------------------------------
// AdamW.

AdamWState AdamWState::zeros(size_t n) {
    AdamWState state;
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
    return state;
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWConfig& config) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw DimensionError("adamw_step: parameter/gradient/state sizes differ");
    }
    if (!(lr > 0.0)) {
        throw ParameterError("adamw_step: lr must be positive");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
        params[i] -= lr * config.weight_decay * params[i];
    }
}

// ---------------------------------------------------------------------------
// LoRA linear.

LoraLinear make_lora_linear(int d_out, int d_in, int rank, double alpha) {
    if (d_out <= 0 || d_in <= 0 || rank <= 0) {
        throw ParameterError("make_lora_linear: dimensions and rank must be positive");
    }
    LoraLinear layer;
    layer.base_weight = Eigen::MatrixXd::Zero(d_out, d_in);
    layer.down = Eigen::MatrixXd::Zero(rank, d_in);
    layer.up = Eigen::MatrixXd::Zero(d_out, rank);
    layer.alpha = alpha;
    layer.rank = rank;
    return layer;
}

Eigen::VectorXd lora_forward(const LoraLinear& layer, const Eigen::VectorXd& x) {
    if (x.size() != layer.base_weight.cols()) {
        throw DimensionError("lora_forward: input size does not match d_in");
    }
    const double scale = layer.alpha / static_cast<double>(layer.rank);
    return layer.base_weight * x + scale * (layer.up * (layer.down * x));
}

ParamCount trainable_param_count(const ModelDescription& desc) {
    ParamCount count;
    count.trainable = desc.unfrozen_head_params;
    count.total = desc.unfrozen_head_params;
    for (const auto& map : desc.adapted_maps) {
        count.trainable += static_cast<long long>(map.rank) * (map.d_in + map.d_out);
        count.total += static_cast<long long>(map.d_in) * map.d_out;
    }
    count.reduction_percent =
        count.total > 0
            ? 100.0 * (1.0 - static_cast<double>(count.trainable) / static_cast<double>(count.total))
            : 0.0;
    return count;
}

// ---------------------------------------------------------------------------
// Training.

std::string_view to_string(TrainMode mode) {
    return mode == TrainMode::FreeLogits ? "free_logits" : "lora_linear";
}

std::optional<TrainMode> train_mode_from_name(std::string_view name) {
    if (name == "free_logits") return TrainMode::FreeLogits;
    if (name == "lora_linear") return TrainMode::LoraLinear;
    return std::nullopt;
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct SampleData {
    const AnnotationRecord* record = nullptr;
    bool is_train = false;
    double scale = 1.0;          // image px -> lattice px
    LandmarkSet lattice_coords;  // annotation mapped onto the heatmap lattice
    HeatmapStack target;         // cached Gaussian target
};

void validate_config(const TrainConfig& config) {
    if (!(config.temperature > 0.0) || !(config.sigma > 0.0) || config.lambda < 0.0) {
        throw ParameterError("train: temperature/sigma/lambda out of range");
    }
    if (config.epochs <= 0 || config.batch < 0) {
        throw ParameterError("train: epochs must be positive, batch nonnegative");
    }
    if (config.hm_width <= 0 || config.hm_height <= 0) {
        throw ParameterError("train: heatmap dimensions must be positive");
    }
    if (config.mode == TrainMode::LoraLinear &&
        (config.feature_dim <= 0 || config.lora_rank <= 0)) {
        throw ParameterError("train: feature_dim and lora_rank must be positive");
    }
}

SampleData make_sample(const AnnotationRecord& rec, bool is_train, const TrainConfig& config) {
    SampleData sample;
    sample.record = &rec;
    sample.is_train = is_train;
    sample.scale = lattice_scale(rec.width, rec.height, config.hm_width, config.hm_height);
    for (int k = 0; k < kNumLandmarks; ++k) {
        sample.lattice_coords.coords[static_cast<size_t>(k)] =
            sample.scale * rec.landmarks.coords[static_cast<size_t>(k)];
    }
    sample.target =
        encode_gaussian(sample.lattice_coords, config.hm_width, config.hm_height, config.sigma);
    return sample;
}

struct ValMetrics {
    double geo_residual = 0.0;
    double mre_px = 0.0;
};

// Residual is measured on the soft-argmax coordinates the loss acts on;
// MRE uses the hard argmax decode, matching how landmarks are extracted
// at inference time.
ValMetrics eval_val(std::span<const SampleData> samples,
                    std::span<const LandmarkSet> decoded_soft,
                    std::span<const LandmarkSet> decoded_hard) {
    LineGroupSchema residual_schema = line_groups_default();
    residual_schema.loss_mode = LossMode::Absolute;
    double residual_sum = 0.0;
    long residual_n = 0;
    double mre_sum = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        try {
            residual_sum += geometric_loss(decoded_soft[i], residual_schema).total;
            ++residual_n;
        } catch (const DegenerateDirectionError&) {
        }
        double dist = 0.0;
        for (int k = 0; k < kNumLandmarks; ++k) {
            const Point2 image_pred = {
                decoded_hard[i].coords[static_cast<size_t>(k)].x / samples[i].scale,
                decoded_hard[i].coords[static_cast<size_t>(k)].y / samples[i].scale};
            const Point2 d = image_pred - samples[i].record->landmarks.coords[static_cast<size_t>(k)];
            dist += std::hypot(d.x, d.y);
        }
        mre_sum += dist / static_cast<double>(kNumLandmarks);
    }
    ValMetrics out;
    out.geo_residual = residual_n > 0 ? residual_sum / static_cast<double>(residual_n) : 0.0;
    out.mre_px = samples.empty() ? 0.0 : mre_sum / static_cast<double>(samples.size());
    return out;
}

void echo_config(TrainReport& report, const TrainConfig& config, size_t n_train, size_t n_val) {
    auto& echo = report.config_echo;
    echo.emplace_back("toolkit_version", std::string(kToolkitVersion));
    echo.emplace_back("mode", std::string(to_string(config.mode)));
    echo.emplace_back("lambda", format_double(config.lambda));
    echo.emplace_back("temperature", format_double(config.temperature));
    echo.emplace_back("sigma", format_double(config.sigma));
    echo.emplace_back("loss_mode", std::string(to_string(config.loss_mode)));
    echo.emplace_back("epochs", std::to_string(config.epochs));
    echo.emplace_back("batch", std::to_string(config.batch));
    echo.emplace_back("seed", std::to_string(config.seed));
    echo.emplace_back("hm_width", std::to_string(config.hm_width));
    echo.emplace_back("hm_height", std::to_string(config.hm_height));
    echo.emplace_back("base_lr", format_double(config.sched.base_lr));
    echo.emplace_back("warmup_steps", std::to_string(config.sched.warmup_steps));
    echo.emplace_back("warmup_start_factor", format_double(config.sched.warmup_start_factor));
    std::string milestones;
    for (size_t i = 0; i < config.sched.milestones.size(); ++i) {
        if (i > 0) milestones += ";";
        milestones += std::to_string(config.sched.milestones[i]);
    }
    echo.emplace_back("milestones", milestones);
    echo.emplace_back("gamma", format_double(config.sched.gamma));
    echo.emplace_back("adamw_beta1", format_double(config.adamw.beta1));
    echo.emplace_back("adamw_beta2", format_double(config.adamw.beta2));
    echo.emplace_back("adamw_epsilon", format_double(config.adamw.epsilon));
    echo.emplace_back("adamw_weight_decay", format_double(config.adamw.weight_decay));
    echo.emplace_back("n_train", std::to_string(n_train));
    echo.emplace_back("n_val", std::to_string(n_val));
    echo.emplace_back("rng", kRngName);
    if (config.mode == TrainMode::LoraLinear) {
        echo.emplace_back("feature_dim", std::to_string(config.feature_dim));
        echo.emplace_back("lora_rank", std::to_string(config.lora_rank));
        echo.emplace_back("lora_alpha", format_double(config.lora_alpha));
        const long long d_out = static_cast<long long>(kNumLandmarks) * config.hm_width *
                                config.hm_height;
        ModelDescription desc;
        desc.adapted_maps.push_back({config.feature_dim, static_cast<int>(d_out), config.lora_rank});
        desc.unfrozen_head_params = d_out;  // trainable output bias
        const ParamCount count = trainable_param_count(desc);
        echo.emplace_back("trainable_params", std::to_string(count.trainable));
        echo.emplace_back("total_params", std::to_string(count.total));
        echo.emplace_back("reduction_percent", format_double(count.reduction_percent));
        // Published large-scale reference, quoted rather than recomputed.
        echo.emplace_back("lora_reference_backbone_params",
                          std::to_string(kReferenceBackboneParams));
        echo.emplace_back("lora_reference_trainable_params",
                          std::to_string(kReferenceLoraTrainableParams));
        echo.emplace_back("lora_reference_reduction_percent",
                          format_double(kReferenceLoraReductionPercent));
    }
}

TrainReport train_free_logits(std::span<const AnnotationRecord> train_records,
                              std::span<const AnnotationRecord> val_records,
                              const TrainConfig& config) {
    std::vector<SampleData> samples;
    samples.reserve(train_records.size() + val_records.size());
    for (const auto& rec : train_records) samples.push_back(make_sample(rec, true, config));
    for (const auto& rec : val_records) samples.push_back(make_sample(rec, false, config));

    std::vector<SampleData> val_samples;
    for (const auto& rec : val_records) val_samples.push_back(make_sample(rec, false, config));

    LineGroupSchema schema = line_groups_default();
    schema.loss_mode = config.loss_mode;

    const size_t n = samples.size();
    std::vector<HeatmapStack> logits(n);
    std::vector<AdamWState> states;
    states.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        logits[i] = HeatmapStack::zeros(config.hm_width, config.hm_height, kNumLandmarks,
                                        HeatmapRole::Logits);
        states.push_back(AdamWState::zeros(logits[i].values.size()));
    }

    const size_t batch_size = config.batch > 0 ? static_cast<size_t>(config.batch) : n;

    TrainReport report;
    echo_config(report, config, train_records.size(), val_records.size());

    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double sum_total = 0.0;
        double sum_mse = 0.0;
        double sum_geo = 0.0;
        long n_train_evals = 0;
        long degenerate = 0;
        double last_factor = 0.0;

        for (size_t begin = 0; begin < n; begin += batch_size) {
            const size_t end = std::min(n, begin + batch_size);
            const double factor = lr_factor(step, epoch, config.sched);
            const double lr = config.sched.base_lr * factor;
            double batch_geo = 0.0;
            long batch_train = 0;
            for (size_t i = begin; i < end; ++i) {
                const auto result = total_loss_with_target(logits[i], samples[i].target,
                                                           schema, config.temperature,
                                                           config.lambda);
                if (!std::isfinite(result.breakdown.total)) {
                    throw DivergenceError("train: non-finite loss at epoch " +
                                          std::to_string(epoch) + "; last finite epoch " +
                                          std::to_string(epoch - 1));
                }
                if (samples[i].is_train) {
                    sum_total += result.breakdown.total;
                    sum_mse += result.breakdown.mse;
                    sum_geo += result.breakdown.geo;
                    batch_geo += result.breakdown.geo;
                    ++batch_train;
                    ++n_train_evals;
                    if (result.geo_degenerate) ++degenerate;
                }
                adamw_step(logits[i].values, result.grad.values, states[i], lr, config.adamw);
            }
            ++step;
            last_factor = factor;
            if (batch_train > 0) {
                report.geo_curve.push_back({step, batch_geo / static_cast<double>(batch_train)});
            }
        }

        std::vector<LandmarkSet> decoded_soft(val_samples.size());
        std::vector<LandmarkSet> decoded_hard(val_samples.size());
        const size_t val_offset = train_records.size();
        for (size_t i = 0; i < val_samples.size(); ++i) {
            decoded_soft[i] = decode_soft_argmax(logits[val_offset + i], config.temperature);
            decoded_hard[i] = decode_argmax(logits[val_offset + i]);
        }
        const ValMetrics val = eval_val(val_samples, decoded_soft, decoded_hard);

        TrainEpochRow row;
        row.epoch = epoch;
        row.step = step;
        row.lr_factor = last_factor;
        row.loss_total = n_train_evals > 0 ? sum_total / static_cast<double>(n_train_evals) : 0.0;
        row.loss_mse = n_train_evals > 0 ? sum_mse / static_cast<double>(n_train_evals) : 0.0;
        row.loss_geo = n_train_evals > 0 ? sum_geo / static_cast<double>(n_train_evals) : 0.0;
        row.geo_residual_val = val.geo_residual;
        row.mre_val_px = val.mre_px;
        row.degenerate_count = degenerate;
        report.rows.push_back(row);
        report.total_degenerate += degenerate;
    }
    return report;
}

TrainReport train_lora_linear(std::span<const AnnotationRecord> train_records,
                              std::span<const AnnotationRecord> val_records,
                              const TrainConfig& config) {
    std::vector<SampleData> train_samples;
    for (const auto& rec : train_records) train_samples.push_back(make_sample(rec, true, config));
    std::vector<SampleData> val_samples;
    for (const auto& rec : val_records) val_samples.push_back(make_sample(rec, false, config));

    LineGroupSchema schema = line_groups_default();
    schema.loss_mode = config.loss_mode;

    const int d_in = config.feature_dim;
    const long d_out = static_cast<long>(kNumLandmarks) * config.hm_width * config.hm_height;
    const int rank = config.lora_rank;
    const double lora_scale = config.lora_alpha / static_cast<double>(rank);

    // Frozen random base map; per-image feature vectors keyed by image_id.
    Eigen::MatrixXd base(d_out, d_in);
    {
        Xoshiro256pp rng(mix_seed(config.seed, 0xBA5EULL));
        const double stddev = 1.0 / std::sqrt(static_cast<double>(d_in));
        for (long j = 0; j < d_in; ++j) {
            for (long i = 0; i < d_out; ++i) {
                base(i, j) = rng.normal(0.0, stddev);
            }
        }
    }
    const auto features_for = [&](const AnnotationRecord& rec) {
        Xoshiro256pp rng(mix_seed(config.seed, fnv1a64(rec.image_id)));
        Eigen::VectorXd x(d_in);
        for (int i = 0; i < d_in; ++i) x(i) = rng.normal();
        return x;
    };
    std::vector<Eigen::VectorXd> train_features;
    for (const auto& rec : train_records) train_features.push_back(features_for(rec));
    std::vector<Eigen::VectorXd> val_features;
    for (const auto& rec : val_records) val_features.push_back(features_for(rec));

    // Flat trainable parameters: [down (r x d_in), up (d_out x r), bias].
    const size_t down_size = static_cast<size_t>(rank) * d_in;
    const size_t up_size = static_cast<size_t>(d_out) * rank;
    const size_t bias_size = static_cast<size_t>(d_out);
    std::vector<double> params(down_size + up_size + bias_size, 0.0);
    {
        // down: small uniform init; up: zero, so the adapted map equals the
        // frozen map exactly at step 0.
        Xoshiro256pp rng(mix_seed(config.seed, 0xADA0ULL));
        const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
        for (size_t i = 0; i < down_size; ++i) {
            params[i] = rng.uniform(-bound, bound);
        }
    }
    AdamWState state = AdamWState::zeros(params.size());
    std::vector<double> grads(params.size(), 0.0);

    const auto down_map = [&](std::vector<double>& v) {
        return Eigen::Map<Eigen::MatrixXd>(v.data(), rank, d_in);
    };
    const auto up_map = [&](std::vector<double>& v) {
        return Eigen::Map<Eigen::MatrixXd>(v.data() + down_size, d_out, rank);
    };
    const auto bias_map = [&](std::vector<double>& v) {
        return Eigen::Map<Eigen::VectorXd>(v.data() + down_size + up_size, d_out);
    };

    const auto forward = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd y = base * x;
        y.noalias() += lora_scale * (up_map(params) * (down_map(params) * x));
        y += bias_map(params);
        HeatmapStack stack = HeatmapStack::zeros(config.hm_width, config.hm_height, kNumLandmarks,
                                                 HeatmapRole::Logits);
        Eigen::VectorXd::Map(stack.values.data(), y.size()) = y;
        return stack;
    };

    const size_t n_train = train_samples.size();
    const size_t batch_size = config.batch > 0 ? static_cast<size_t>(config.batch) : n_train;

    TrainReport report;
    echo_config(report, config, train_records.size(), val_records.size());

    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double sum_total = 0.0;
        double sum_mse = 0.0;
        double sum_geo = 0.0;
        long degenerate = 0;
        double last_factor = 0.0;

        for (size_t begin = 0; begin < n_train; begin += batch_size) {
            const size_t end = std::min(n_train, begin + batch_size);
            const double factor = lr_factor(step, epoch, config.sched);
            const double lr = config.sched.base_lr * factor;
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            std::fill(grads.begin(), grads.end(), 0.0);
            double batch_geo = 0.0;

            for (size_t i = begin; i < end; ++i) {
                const HeatmapStack pred = forward(train_features[i]);
                const auto result = total_loss_with_target(pred, train_samples[i].target, schema,
                                                           config.temperature, config.lambda);
                if (!std::isfinite(result.breakdown.total)) {
                    throw DivergenceError("train: non-finite loss at epoch " +
                                          std::to_string(epoch) + "; last finite epoch " +
                                          std::to_string(epoch - 1));
                }
                sum_total += result.breakdown.total;
                sum_mse += result.breakdown.mse;
                sum_geo += result.breakdown.geo;
                batch_geo += result.breakdown.geo;
                if (result.geo_degenerate) ++degenerate;

                const Eigen::Map<const Eigen::VectorXd> g(result.grad.values.data(), d_out);
                const Eigen::VectorXd down_x = down_map(const_cast<std::vector<double>&>(params)) *
                                               train_features[i];
                Eigen::Map<Eigen::MatrixXd> g_down(grads.data(), rank, d_in);
                Eigen::Map<Eigen::MatrixXd> g_up(grads.data() + down_size, d_out, rank);
                Eigen::Map<Eigen::VectorXd> g_bias(grads.data() + down_size + up_size, d_out);
                g_up.noalias() += (inv_batch * lora_scale) * (g * down_x.transpose());
                g_down.noalias() += (inv_batch * lora_scale) *
                                    ((up_map(params).transpose() * g) *
                                     train_features[i].transpose());
                g_bias += inv_batch * g;
            }

            adamw_step(params, grads, state, lr, config.adamw);
            ++step;
            last_factor = factor;
            report.geo_curve.push_back(
                {step, batch_geo / static_cast<double>(end - begin)});
        }

        std::vector<LandmarkSet> decoded_soft(val_samples.size());
        std::vector<LandmarkSet> decoded_hard(val_samples.size());
        for (size_t i = 0; i < val_samples.size(); ++i) {
            const HeatmapStack pred = forward(val_features[i]);
            decoded_soft[i] = decode_soft_argmax(pred, config.temperature);
            decoded_hard[i] = decode_argmax(pred);
        }
        const ValMetrics val = eval_val(val_samples, decoded_soft, decoded_hard);

        TrainEpochRow row;
        row.epoch = epoch;
        row.step = step;
        row.lr_factor = last_factor;
        const double denom = static_cast<double>(n_train);
        row.loss_total = sum_total / denom;
        row.loss_mse = sum_mse / denom;
        row.loss_geo = sum_geo / denom;
        row.geo_residual_val = val.geo_residual;
        row.mre_val_px = val.mre_px;
        row.degenerate_count = degenerate;
        report.rows.push_back(row);
        report.total_degenerate += degenerate;
    }
    return report;
}

}  // namespace

TrainReport train(std::span<const AnnotationRecord> train_records,
                  std::span<const AnnotationRecord> val_records, const TrainConfig& config) {
    validate_config(config);
    if (train_records.empty()) {
        throw ParameterError("train: empty training set");
    }
    if (config.mode == TrainMode::FreeLogits) {
        return train_free_logits(train_records, val_records, config);
    }
    return train_lora_linear(train_records, val_records, config);
}

std::string TrainReport::csv() const {
    std::string out;
    for (const auto& [key, value] : config_echo) {
        out += "# " + key + "=" + value + "\n";
    }
    out += "epoch,step,lr_factor,loss_total,loss_mse,loss_geo,geo_residual_val,mre_val_px,"
           "degenerate_count\n";
    for (const auto& row : rows) {
        out += std::to_string(row.epoch) + "," + std::to_string(row.step) + "," +
               format_double(row.lr_factor) + "," + format_double(row.loss_total) + "," +
               format_double(row.loss_mse) + "," + format_double(row.loss_geo) + "," +
               format_double(row.geo_residual_val) + "," + format_double(row.mre_val_px) + "," +
               std::to_string(row.degenerate_count) + "\n";
    }
    return out;
}

std::string TrainReport::geo_curve_csv() const {
    std::string out = "step,loss_geo\n";
    for (const auto& sample : geo_curve) {
        out += std::to_string(sample.step) + "," + format_double(sample.loss_geo) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient check.

namespace {

// Deviations are measured against the largest gradient magnitude seen for
// the component (floored at 1), not entry-by-entry: near-zero entries of a
// sharply peaked softmax otherwise turn finite-difference noise into
// meaningless ratios.
struct ErrAccumulator {
    double max_dev = 0.0;
    double scale = 1.0;

    void add(double analytic, double fd) {
        max_dev = std::max(max_dev, std::abs(analytic - fd));
        scale = std::max({scale, std::abs(analytic), std::abs(fd)});
    }
    double rel() const { return max_dev / scale; }
};

std::vector<size_t> probe_pixels(Xoshiro256pp& rng, size_t n_pixels, size_t argmax_idx,
                                 int width, int count) {
    std::vector<size_t> probes;
    probes.push_back(argmax_idx);
    const auto push_clipped = [&](long idx) {
        if (idx >= 0 && idx < static_cast<long>(n_pixels)) {
            probes.push_back(static_cast<size_t>(idx));
        }
    };
    push_clipped(static_cast<long>(argmax_idx) - 1);
    push_clipped(static_cast<long>(argmax_idx) + 1);
    push_clipped(static_cast<long>(argmax_idx) - width);
    push_clipped(static_cast<long>(argmax_idx) + width);
    for (int i = 0; i < count; ++i) {
        probes.push_back(static_cast<size_t>(rng.uniform01() * static_cast<double>(n_pixels)));
    }
    return probes;
}

}  // namespace

bool GradcheckReport::all_ok(double threshold) const {
    for (const auto& row : rows) {
        if (row.status == "fail") return false;
        if (row.status == "ok" && row.max_rel_err > threshold) return false;
    }
    return true;
}

std::string GradcheckReport::csv() const {
    std::string out = "component,max_rel_err,status\n";
    for (const auto& row : rows) {
        out += row.component + "," + format_double(row.max_rel_err) + "," + row.status + "\n";
    }
    return out;
}

GradcheckReport gradcheck(const GradcheckConfig& config, std::uint64_t seed) {
    const int width = config.width;
    const int height = config.height;
    const size_t n_pixels = static_cast<size_t>(width) * height;
    const double h = config.fd_step;
    LineGroupSchema schema = line_groups_default();
    schema.loss_mode = config.loss_mode;

    ErrAccumulator mse_err;
    ErrAccumulator jac_err;
    ErrAccumulator geo_err;
    ErrAccumulator total_err;

    for (int instance = 0; instance < config.instances; ++instance) {
        Xoshiro256pp rng(mix_seed(seed, static_cast<std::uint64_t>(instance)));

        HeatmapStack logits = HeatmapStack::zeros(width, height, kNumLandmarks,
                                                  HeatmapRole::Logits);
        for (double& v : logits.values) {
            v = rng.uniform(-10.0, 10.0);
        }
        LandmarkSet target;
        for (auto& p : target.coords) {
            p = {rng.uniform(3.0, width - 4.0), rng.uniform(3.0, height - 4.0)};
        }
        const HeatmapStack target_stack = encode_gaussian(target, width, height, config.sigma);

        // mse_heatmap_grad vs central differences.
        {
            const HeatmapStack analytic = mse_heatmap_grad(logits, target_stack);
            HeatmapStack probe = logits;
            for (int k = 0; k < 8; ++k) {
                const size_t idx =
                    static_cast<size_t>(rng.uniform01() * static_cast<double>(analytic.values.size()));
                const double saved = probe.values[idx];
                probe.values[idx] = saved + h;
                const double up = mse_heatmap(probe, target_stack);
                probe.values[idx] = saved - h;
                const double down = mse_heatmap(probe, target_stack);
                probe.values[idx] = saved;
                mse_err.add(analytic.values[idx], (up - down) / (2.0 * h));
            }
        }

        // soft_argmax_jacobian vs central differences on one channel.
        {
            const int c = instance % kNumLandmarks;
            auto channel = logits.channel(c);
            const auto jac = soft_argmax_jacobian(channel, width, height, config.temperature);
            const Point2 peak = argmax_point(channel, width, height);
            const size_t argmax_idx = static_cast<size_t>(peak.y) * width +
                                      static_cast<size_t>(peak.x);
            std::vector<double> perturbed(channel.begin(), channel.end());
            for (size_t idx : probe_pixels(rng, n_pixels, argmax_idx, width,
                                           config.sampled_pixels)) {
                const double saved = perturbed[idx];
                perturbed[idx] = saved + h;
                const Point2 up = soft_argmax(perturbed, width, height, config.temperature);
                perturbed[idx] = saved - h;
                const Point2 down = soft_argmax(perturbed, width, height, config.temperature);
                perturbed[idx] = saved;
                jac_err.add(jac.dx[idx], (up.x - down.x) / (2.0 * h));
                jac_err.add(jac.dy[idx], (up.y - down.y) / (2.0 * h));
            }
        }

        // geometric_loss_grad vs central differences on a perturbed but
        // non-degenerate synthetic configuration.
        if (config.lambda > 0.0) {
            const auto params = sample_tooth_params(ParamRanges{},
                                                    mix_seed(seed, 0xC0FFEE0ULL + instance));
            LandmarkSet landmarks = perturb(generate_tooth_config(params), 3.0,
                                            mix_seed(seed, 0xA015EULL + instance));
            const LandmarkGradient analytic = geometric_loss_grad(landmarks, schema);
            for (int k = 0; k < kNumLandmarks; ++k) {
                for (int axis = 0; axis < 2; ++axis) {
                    LandmarkSet probe = landmarks;
                    double& coord = axis == 0 ? probe.coords[static_cast<size_t>(k)].x
                                              : probe.coords[static_cast<size_t>(k)].y;
                    coord += h;
                    const double up = geometric_loss(probe, schema).total;
                    coord -= 2.0 * h;
                    const double down = geometric_loss(probe, schema).total;
                    const double fd = (up - down) / (2.0 * h);
                    const double a = axis == 0 ? analytic[static_cast<size_t>(k)].x
                                               : analytic[static_cast<size_t>(k)].y;
                    geo_err.add(a, fd);
                }
            }
        }

        // Combined total-loss gradient vs central differences.
        {
            const auto result = total_loss(logits, target, schema, config.temperature,
                                           config.sigma, config.lambda);
            HeatmapStack probe = logits;
            Xoshiro256pp probe_rng(mix_seed(seed, 0x70705ULL + instance));
            for (int k = 0; k < 12; ++k) {
                const size_t idx =
                    static_cast<size_t>(probe_rng.uniform01() * static_cast<double>(probe.values.size()));
                const double saved = probe.values[idx];
                probe.values[idx] = saved + h;
                const double up = total_loss(probe, target, schema, config.temperature,
                                             config.sigma, config.lambda).breakdown.total;
                probe.values[idx] = saved - h;
                const double down = total_loss(probe, target, schema, config.temperature,
                                               config.sigma, config.lambda).breakdown.total;
                probe.values[idx] = saved;
                total_err.add(result.grad.values[idx], (up - down) / (2.0 * h));
            }
        }
    }

    GradcheckReport report;
    const auto status_for = [](const ErrAccumulator& acc) {
        return acc.rel() <= 1e-4 ? std::string("ok") : std::string("fail");
    };
    report.rows.push_back({"mse_grad", mse_err.rel(), status_for(mse_err)});
    report.rows.push_back({"soft_argmax_jacobian", jac_err.rel(), status_for(jac_err)});
    if (config.lambda > 0.0) {
        report.rows.push_back({"geometric_loss_grad", geo_err.rel(), status_for(geo_err)});
    } else {
        report.rows.push_back({"geometric_loss_grad", 0.0, "not exercised"});
    }
    report.rows.push_back({"total_loss_grad", total_err.rel(), status_for(total_err)});

    // Degenerate fallback: a level line whose channels are all uniform
    // decodes to coincident points; the geo term must contribute exactly
    // nothing to value or gradient.
    if (config.lambda > 0.0) {
        Xoshiro256pp rng(mix_seed(seed, 0xDE6E0ULL));
        HeatmapStack logits = HeatmapStack::zeros(width, height, kNumLandmarks,
                                                  HeatmapRole::Logits);
        for (double& v : logits.values) {
            v = rng.uniform(-5.0, 5.0);
        }
        for (LandmarkId id : {LandmarkId::AB_13, LandmarkId::AR_13, LandmarkId::PR_13,
                              LandmarkId::PB_13}) {
            auto channel = logits.channel(index_of(id));
            std::fill(channel.begin(), channel.end(), 0.0);
        }
        LandmarkSet target;
        for (auto& p : target.coords) {
            p = {rng.uniform(3.0, width - 4.0), rng.uniform(3.0, height - 4.0)};
        }
        const HeatmapStack target_stack = encode_gaussian(target, width, height, config.sigma);
        const auto with_geo = total_loss(logits, target, schema, config.temperature, config.sigma,
                                         config.lambda);
        const HeatmapStack mse_only = mse_heatmap_grad(logits, target_stack);
        double max_dev = 0.0;
        for (size_t i = 0; i < mse_only.values.size(); ++i) {
            max_dev = std::max(max_dev, std::abs(with_geo.grad.values[i] - mse_only.values[i]));
        }
        const bool ok = with_geo.geo_degenerate && with_geo.breakdown.geo == 0.0 && max_dev == 0.0;
        report.rows.push_back({"degenerate_fallback", max_dev,
                               ok ? "fallback path: zero gradient verified" : "fail"});
    } else {
        report.rows.push_back({"degenerate_fallback", 0.0, "not exercised"});
    }
    return report;
}

}  // namespace geomark
