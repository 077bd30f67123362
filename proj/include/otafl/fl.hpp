#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otafl/common.hpp"
#include "otafl/weightcodec.hpp"

namespace otafl::fl {

using codec::WeightVector;

struct ModelParams {
  RVector theta;

  std::size_t size() const { return theta.size(); }
  bool operator==(const ModelParams&) const = default;
};

enum class TaskKind { linear_regression, two_layer_mlp_classification };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

/// A local dataset plus the model family trained on it.
///
/// linear_regression: theta = [W (C x d, row-major), b (C)], squared error
/// summed over the C outputs and averaged over rows; C = 1 gives [w, b].
/// two_layer_mlp_classification: theta = [W1 (h x d, row-major), b1 (h),
/// W2 (C x h, row-major), b2 (C)], tanh hidden layer, softmax
/// cross-entropy, one-hot targets n x C.
struct Task {
  TaskKind kind = TaskKind::linear_regression;
  Eigen::MatrixXd features;
  Eigen::MatrixXd targets;
  std::size_t hidden = 0;

  std::size_t samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(targets.cols()); }
  void validate() const;
};

std::size_t param_count(const Task& task);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t local_epochs = 1;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate(std::size_t dataset_size) const;
  bool operator==(const TrainConfig&) const = default;
};

struct RoundState {
  std::size_t round = 0;
  ModelParams global;
  std::size_t num_ues = 1;
};

/// Mean loss over `rows` (all rows when empty) and its gradient.
double loss_and_gradient(const Task& task, std::span<const double> theta,
                         std::span<const std::size_t> rows, RVector& grad);

/// Mean loss over the full dataset.
double loss(const Task& task, std::span<const double> theta);

/// Fraction of rows whose argmax prediction matches the one-hot target
/// (classification only).
double accuracy(const Task& task, std::span<const double> theta);

/// E epochs of shuffled mini-batch optimization starting from `global`.
/// Optimizer state starts fresh on every call.
ModelParams local_train(const ModelParams& global, const Task& task, const TrainConfig& cfg);

WeightVector compute_delta(const ModelParams& local, const ModelParams& global_prev);
ModelParams apply_global(const ModelParams& global_prev, const WeightVector& avg_delta);

/// Elementwise mean, summed in ascending UE order.
ModelParams fedavg_digital(const std::vector<ModelParams>& locals);
WeightVector mean_delta(const std::vector<WeightVector>& deltas);

/// Per-parameter population variance across UEs, averaged over parameters.
double update_variance(const std::vector<WeightVector>& deltas);

/// Symmetric per-tensor 8-bit quantization (scale = max|x| / 127) followed
/// by dequantization.
WeightVector quantize_int8(const WeightVector& delta);

/// Concatenation of datasets (same kind and dimensions).
Task union_task(const std::vector<Task>& tasks);

/// Per-UE linear-regression data with distinct generating weights:
/// W_i = W_common + heterogeneity * N(0, 1/d), x ~ N(0, I), y = W_i x + b_i + noise.
std::vector<Task> make_regression_tasks(std::size_t num_ues, std::size_t samples_per_ue,
                                        std::size_t dim, double heterogeneity, double noise_std,
                                        std::uint64_t seed, std::size_t outputs = 1);

/// Gaussian-blob classification; each UE draws its own class proportions.
std::vector<Task> make_blob_tasks(std::size_t num_ues, std::size_t samples_per_ue, std::size_t dim,
                                  std::size_t classes, std::size_t hidden, std::uint64_t seed);

/// Zeros for regression, scaled Gaussian weights for the MLP.
ModelParams init_params(const Task& task, std::uint64_t seed);

/// Loads a whitespace-separated text table: one row per sample, feature
/// columns first, then `target_columns` target columns. '#' starts a comment.
Task load_task_table(const std::string& path, TaskKind kind, std::size_t target_columns,
                     std::size_t hidden = 0);

}  // namespace otafl::fl
