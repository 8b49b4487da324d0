// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale optimization of heatmap logits under the combined loss:
// AdamW updates, warmup + multi-step learning-rate schedule, an optional
// low-rank-adapted linear model with parameter accounting, and the
// finite-difference gradient checker.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geomark/landmarks.hpp"
#include "geomark/losses.hpp"

namespace geomark {

// ---------------------------------------------------------------------------
// Learning-rate schedule: linear warmup in steps, multi-step decay in epochs.

struct LrSchedule {
    double base_lr = 5e-4;
    int warmup_steps = 500;
    double warmup_start_factor = 0.001;
    std::vector<int> milestones = {170, 200};
    double gamma = 0.1;
};

// warmup = start + (1 - start) * min(step, warmup_steps) / warmup_steps
// decay  = gamma ^ #(milestones <= epoch);  factor = warmup * decay.
double lr_factor(long step, int epoch, const LrSchedule& sched);

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay over flat parameter vectors.

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step_count = 0;

    static AdamWState zeros(size_t n);
};

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWConfig& config = {});

// ---------------------------------------------------------------------------
// Low-rank adapted linear map: effective weight = W + (alpha/r) * up * down.

struct LoraLinear {
    Eigen::MatrixXd base_weight;  // W, d_out x d_in, frozen
    Eigen::MatrixXd down;         // A, r x d_in
    Eigen::MatrixXd up;           // B, d_out x r; zero-init keeps the base map exact
    double alpha = 4.0;
    int rank = 4;

    int d_in() const { return static_cast<int>(base_weight.cols()); }
    int d_out() const { return static_cast<int>(base_weight.rows()); }
    long trainable_count() const {
        return static_cast<long>(rank) * (d_in() + d_out());
    }
};

LoraLinear make_lora_linear(int d_out, int d_in, int rank, double alpha);

// y = W x + (alpha/r) * up * (down * x)
Eigen::VectorXd lora_forward(const LoraLinear& layer, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Parameter accounting.

struct AdaptedMapDesc {
    int d_in = 0;
    int d_out = 0;
    int rank = 0;
};

struct ModelDescription {
    std::vector<AdaptedMapDesc> adapted_maps;
    long long unfrozen_head_params = 0;
};

struct ParamCount {
    long long trainable = 0;
    long long total = 0;  // what full fine-tuning would train
    double reduction_percent = 0.0;
};

ParamCount trainable_param_count(const ModelDescription& desc);

// Published reference point for a full-scale 0.3B-parameter backbone;
// rendered in reports as a citation line, never recomputed.
inline constexpr long long kReferenceBackboneParams = 330'000'000;
inline constexpr long long kReferenceLoraTrainableParams = 24'000'000;
inline constexpr double kReferenceLoraReductionPercent = 92.73;

// ---------------------------------------------------------------------------
// Training.

enum class TrainMode { FreeLogits, LoraLinear };

std::string_view to_string(TrainMode mode);
std::optional<TrainMode> train_mode_from_name(std::string_view name);

struct TrainConfig {
    TrainMode mode = TrainMode::FreeLogits;
    double lambda = kDefaultLambda;
    double temperature = kDefaultTemperature;
    double sigma = kDefaultSigma;
    LossMode loss_mode = LossMode::Raw;
    int epochs = 300;
    int batch = 0;  // 0 = full dataset
    std::uint64_t seed = 0;
    int hm_width = 64;
    int hm_height = 64;
    LrSchedule sched;
    AdamWConfig adamw;
    // lora_linear mode only:
    int feature_dim = 32;
    int lora_rank = 4;
    double lora_alpha = 4.0;
};

struct TrainEpochRow {
    int epoch = 0;
    long step = 0;           // optimizer steps taken so far
    double lr_factor = 0.0;  // factor at the last step of the epoch
    double loss_total = 0.0;
    double loss_mse = 0.0;
    double loss_geo = 0.0;
    double geo_residual_val = 0.0;  // absolute-mode residual of decoded val sets
    double mre_val_px = 0.0;        // image-pixel MRE on the val set
    long degenerate_count = 0;      // geo fallbacks among train samples this epoch
};

struct StepGeoSample {
    long step = 0;
    double loss_geo = 0.0;
};

struct TrainReport {
    std::vector<std::pair<std::string, std::string>> config_echo;  // '# key=value' lines
    std::vector<TrainEpochRow> rows;
    std::vector<StepGeoSample> geo_curve;
    long total_degenerate = 0;

    const TrainEpochRow& final_row() const { return rows.back(); }
    std::string csv() const;
    std::string geo_curve_csv() const;
};

// Deterministic single-threaded optimization. free_logits: per-image
// heatmap logits are the parameters (train and val images alike, so val
// metrics mean something); loss columns aggregate train images, val
// columns the val images. lora_linear: one shared adapted linear model
// from per-image random features, genuine held-out validation.
TrainReport train(std::span<const AnnotationRecord> train_records,
                  std::span<const AnnotationRecord> val_records, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.

struct GradcheckConfig {
    int instances = 100;
    int width = 32;
    int height = 32;
    double temperature = kDefaultTemperature;
    double sigma = kDefaultSigma;
    double lambda = kDefaultLambda;
    LossMode loss_mode = LossMode::Raw;
    double fd_step = 1e-5;
    int sampled_pixels = 12;  // FD probes per instance beyond the peak region
};

struct GradcheckRow {
    std::string component;
    double max_rel_err = 0.0;
    std::string status;  // "ok", "fail", "not exercised", ...
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    bool all_ok(double threshold = 1e-4) const;
    std::string csv() const;
};

GradcheckReport gradcheck(const GradcheckConfig& config, std::uint64_t seed);

}  // namespace geomark
