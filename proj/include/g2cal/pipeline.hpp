#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "g2cal/dataset.hpp"
#include "g2cal/g2pp.hpp"
#include "g2cal/nn.hpp"

namespace g2cal {

enum class PipelineKind { Indirect, Direct };
enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
    PipelineKind kind = PipelineKind::Indirect;
    int batch_size = 1000;
    int epochs = 1000;      // direct default is 4000
    double lr = 0.001;      // direct default is 0.0002
    LrSchedule schedule = LrSchedule::Constant;  // cosine anneals lr to 0
    double dropout_p = 0.25;
    std::uint64_t seed = 42;
    int conv_channels = 4;
    int grid_h = 106;       // direct only: observation steps
    int grid_w = 27;        // direct only: tenor count
};

/// nf -> 1000 -> 1500 -> 1000 -> dropout -> 5, ReLU on hidden layers,
/// linear output.
nn::Model build_fcn(int nf, std::uint64_t seed, double dropout_p = 0.25);

/// conv(7x7, stride 2, pad 3) -> ReLU -> maxpool(7, stride 2) -> flatten
/// -> dense 100 -> ReLU -> dropout -> dense 5.
nn::Model build_cnn(int height, int width, int channels, std::uint64_t seed,
                    double dropout_p = 0.25);

struct TrainResult {
    nn::Model model;
    std::vector<double> loss_history;  // per-epoch mean training loss
};

/// Seeded shuffled mini-batch Adam training on already-scaled data.
TrainResult train(const TrainConfig& config, const Eigen::MatrixXd& features,
                  const Eigen::MatrixXd& targets);

struct CalibrationReport {
    Eigen::VectorXd mse_raw;     // per parameter, raw units
    Eigen::VectorXd mse_scaled;  // per parameter, scaled units
    double inference_seconds = 0.0;
    Eigen::MatrixXd predicted_raw;  // N x 5
    Eigen::MatrixXd true_raw;       // N x 5
};

/// Batched eval-mode inference; predictions inverse-scaled to raw units.
/// `feature_scaler` is null for the direct pipeline (targets-only scaling).
CalibrationReport evaluate(nn::Model& model, PipelineKind kind,
                           const Eigen::MatrixXd& features_raw,
                           const Eigen::MatrixXd& targets_raw,
                           const MinMaxScaler* feature_scaler,
                           const MinMaxScaler& target_scaler, int grid_h = 0,
                           int grid_w = 0, int eval_batch = 500);

void write_report_csv(const std::string& path, const CalibrationReport& report);
void write_fitting_csv(const std::string& path, const CalibrationReport& report);

/// Classical least-squares baseline: Nelder-Mead on the SSD between the
/// model cov/corr matrix and the target, parameters clamped to bounds.
struct ClassicalResult {
    G2ppParams params;
    double ssd = 0.0;
    int iterations = 0;
    bool converged = false;
};

ClassicalResult classical_calibrate(const Eigen::MatrixXd& target,
                                    const std::vector<double>& tenors,
                                    CurveKind kind, Quantity quantity,
                                    const G2ppParams& init,
                                    const ParamRanges& bounds,
                                    int max_iter = 4000);

/// Parameter sweep of cov/corr derivatives at one (Ti,Tj) pair.
struct SensitivityTable {
    ParamId param;
    std::vector<double> values;
    std::vector<double> cov_deriv;
    std::vector<double> corr_deriv;
};

std::vector<SensitivityTable> sensitivity_report(const ParamRanges& ranges,
                                                 int n_samples, double ti,
                                                 double tj, CurveKind kind,
                                                 const G2ppParams& reference);

void write_sensitivity_csv(const std::string& path,
                           const std::vector<SensitivityTable>& tables);

/// Checkpoint: architecture + parameters + embedded scalers.
struct Checkpoint {
    PipelineKind kind = PipelineKind::Indirect;
    std::string variant;
    nn::Model model{0};
    std::optional<MinMaxScaler> feature_scaler;
    MinMaxScaler target_scaler;
    int grid_h = 0;
    int grid_w = 0;
};

void save_checkpoint(const std::string& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Per-parameter variance of the uniform distribution, range^2 / 12 — the
/// MSE of the constant midpoint predictor.
Eigen::VectorXd skill_floor(const ParamRanges& ranges);

}  // namespace g2cal
