#include "otafl/fl.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "otafl/rng.hpp"

namespace otafl::fl {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMapMut = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

MatrixXd gather_rows(const MatrixXd& m, std::span<const std::size_t> rows) {
  MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

double regression_loss_grad(const Task& task, std::span<const double> theta, const MatrixXd& x,
                            const MatrixXd& y, RVector* grad) {
  const Index d = x.cols();
  const Index c = y.cols();
  RowMajorMap w(theta.data(), c, d);
  Eigen::Map<const VectorXd> b(theta.data() + c * d, c);
  const MatrixXd resid = (x * w.transpose()).rowwise() + b.transpose() - y;
  const double n = static_cast<double>(x.rows());
  if (grad) {
    grad->assign(param_count(task), 0.0);
    RowMajorMapMut gw(grad->data(), c, d);
    gw = (2.0 / n) * (resid.transpose() * x);
    Eigen::Map<VectorXd> gb(grad->data() + c * d, c);
    gb = (2.0 / n) * resid.colwise().sum().transpose();
  }
  return resid.squaredNorm() / n;
}

struct MlpView {
  RowMajorMap w1;
  Eigen::Map<const VectorXd> b1;
  RowMajorMap w2;
  Eigen::Map<const VectorXd> b2;
};

MlpView mlp_view(const Task& task, std::span<const double> theta) {
  const Index d = static_cast<Index>(task.input_dim());
  const Index h = static_cast<Index>(task.hidden);
  const Index c = static_cast<Index>(task.output_dim());
  const double* p = theta.data();
  return {RowMajorMap(p, h, d), Eigen::Map<const VectorXd>(p + h * d, h),
          RowMajorMap(p + h * d + h, c, h), Eigen::Map<const VectorXd>(p + h * d + h + c * h, c)};
}

// Row-wise softmax probabilities of the MLP output.
MatrixXd mlp_forward(const MlpView& v, const MatrixXd& x, MatrixXd& hidden) {
  hidden = ((x * v.w1.transpose()).rowwise() + v.b1.transpose()).array().tanh().matrix();
  MatrixXd logits = (hidden * v.w2.transpose()).rowwise() + v.b2.transpose();
  const VectorXd row_max = logits.rowwise().maxCoeff();
  logits = (logits.colwise() - row_max).array().exp().matrix();
  const VectorXd sums = logits.rowwise().sum();
  for (Index r = 0; r < logits.rows(); ++r) logits.row(r) /= sums(r);
  return logits;
}

double mlp_loss_grad(const Task& task, std::span<const double> theta, const MatrixXd& x,
                     const MatrixXd& y, RVector* grad) {
  const MlpView v = mlp_view(task, theta);
  MatrixXd hidden;
  const MatrixXd probs = mlp_forward(v, x, hidden);
  const double n = static_cast<double>(x.rows());
  double loss = 0.0;
  for (Index r = 0; r < y.rows(); ++r) {
    for (Index c = 0; c < y.cols(); ++c) {
      if (y(r, c) != 0.0) loss -= y(r, c) * std::log(std::max(probs(r, c), 1e-300));
    }
  }
  loss /= n;
  if (grad) {
    const Index d = static_cast<Index>(task.input_dim());
    const Index h = static_cast<Index>(task.hidden);
    const Index c = static_cast<Index>(task.output_dim());
    grad->assign(param_count(task), 0.0);
    double* g = grad->data();
    const MatrixXd dlogits = (probs - y) / n;                                  // n x C
    const MatrixXd dhidden = (dlogits * v.w2).array() * (1.0 - hidden.array().square());  // n x h
    RowMajorMapMut(g, h, d) = dhidden.transpose() * x;
    Eigen::Map<VectorXd>(g + h * d, h) = dhidden.colwise().sum().transpose();
    RowMajorMapMut(g + h * d + h, c, h) = dlogits.transpose() * hidden;
    Eigen::Map<VectorXd>(g + h * d + h + c * h, c) = dlogits.colwise().sum().transpose();
  }
  return loss;
}

double evaluate(const Task& task, std::span<const double> theta, std::span<const std::size_t> rows,
                RVector* grad) {
  check_same_length(theta.size(), param_count(task), "theta vs task parameters");
  if (rows.empty()) {
    return task.kind == TaskKind::linear_regression
               ? regression_loss_grad(task, theta, task.features, task.targets, grad)
               : mlp_loss_grad(task, theta, task.features, task.targets, grad);
  }
  const MatrixXd x = gather_rows(task.features, rows);
  const MatrixXd y = gather_rows(task.targets, rows);
  return task.kind == TaskKind::linear_regression ? regression_loss_grad(task, theta, x, y, grad)
                                                  : mlp_loss_grad(task, theta, x, y, grad);
}

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::linear_regression ? "linear_regression" : "two_layer_mlp_classification";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "linear_regression") return TaskKind::linear_regression;
  if (name == "two_layer_mlp_classification" || name == "mlp") return TaskKind::two_layer_mlp_classification;
  throw ConfigError("unknown task kind '" + name + "'");
}

void Task::validate() const {
  if (features.rows() == 0) throw ConfigError("task has no samples");
  if (features.rows() != targets.rows()) throw DimensionError("task feature and target rows differ");
  if (kind == TaskKind::linear_regression && targets.cols() == 0) {
    throw DimensionError("regression targets need at least one column");
  }
  if (kind == TaskKind::two_layer_mlp_classification && (hidden == 0 || targets.cols() < 2)) {
    throw ConfigError("MLP task needs hidden units and at least two classes");
  }
}

std::size_t param_count(const Task& task) {
  const std::size_t d = task.input_dim();
  if (task.kind == TaskKind::linear_regression) return (d + 1) * task.output_dim();
  const std::size_t h = task.hidden;
  const std::size_t c = task.output_dim();
  return h * d + h + c * h + c;
}

void TrainConfig::validate(std::size_t dataset_size) const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (batch_size == 0 || batch_size > dataset_size) {
    throw ConfigError("train.batch_size must lie in [1, dataset size]");
  }
}

double loss_and_gradient(const Task& task, std::span<const double> theta,
                         std::span<const std::size_t> rows, RVector& grad) {
  return evaluate(task, theta, rows, &grad);
}

double loss(const Task& task, std::span<const double> theta) { return evaluate(task, theta, {}, nullptr); }

double accuracy(const Task& task, std::span<const double> theta) {
  if (task.kind != TaskKind::two_layer_mlp_classification) {
    throw ConfigError("accuracy is defined for classification tasks only");
  }
  check_same_length(theta.size(), param_count(task), "theta vs task parameters");
  MatrixXd hidden;
  const MatrixXd probs = mlp_forward(mlp_view(task, theta), task.features, hidden);
  std::size_t hits = 0;
  for (Index r = 0; r < probs.rows(); ++r) {
    Index p = 0;
    Index t = 0;
    probs.row(r).maxCoeff(&p);
    task.targets.row(r).maxCoeff(&t);
    if (p == t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

ModelParams local_train(const ModelParams& global, const Task& task, const TrainConfig& cfg) {
  check_same_length(global.size(), param_count(task), "local_train");
  ModelParams local = global;
  if (cfg.local_epochs == 0) return local;
  cfg.validate(task.samples());

  Rng rng(cfg.seed);
  const std::size_t n = task.samples();
  const std::size_t p = local.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RVector grad(p);
  RVector m(p, 0.0);
  RVector v(p, 0.0);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      // A full pass in natural order is the same batch; skip the gather.
      if (count == n) {
        evaluate(task, local.theta, {}, &grad);
      } else {
        evaluate(task, local.theta, rows, &grad);
      }
      ++step;
      if (cfg.optimizer == OptimizerKind::sgd) {
        for (std::size_t k = 0; k < p; ++k) local.theta[k] -= cfg.learning_rate * grad[k];
      } else {
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (std::size_t k = 0; k < p; ++k) {
          m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
          v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
          local.theta[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
        }
      }
    }
  }
  return local;
}

WeightVector compute_delta(const ModelParams& local, const ModelParams& global_prev) {
  check_same_length(local.size(), global_prev.size(), "compute_delta");
  WeightVector d{RVector(local.size())};
  for (std::size_t k = 0; k < d.size(); ++k) d.values[k] = local.theta[k] - global_prev.theta[k];
  return d;
}

ModelParams apply_global(const ModelParams& global_prev, const WeightVector& avg_delta) {
  check_same_length(global_prev.size(), avg_delta.size(), "apply_global");
  ModelParams g = global_prev;
  for (std::size_t k = 0; k < g.size(); ++k) g.theta[k] += avg_delta.values[k];
  return g;
}

ModelParams fedavg_digital(const std::vector<ModelParams>& locals) {
  if (locals.empty()) throw PreconditionError("fedavg_digital: no local models");
  ModelParams avg{RVector(locals.front().size(), 0.0)};
  for (const auto& l : locals) {
    check_same_length(l.size(), avg.size(), "fedavg_digital");
    for (std::size_t k = 0; k < avg.size(); ++k) avg.theta[k] += l.theta[k];
  }
  const double m = static_cast<double>(locals.size());
  for (double& x : avg.theta) x /= m;
  return avg;
}

WeightVector mean_delta(const std::vector<WeightVector>& deltas) {
  if (deltas.empty()) throw PreconditionError("mean_delta: no updates");
  WeightVector avg{RVector(deltas.front().size(), 0.0)};
  for (const auto& d : deltas) {
    check_same_length(d.size(), avg.size(), "mean_delta");
    for (std::size_t k = 0; k < avg.size(); ++k) avg.values[k] += d.values[k];
  }
  const double m = static_cast<double>(deltas.size());
  for (double& x : avg.values) x /= m;
  return avg;
}

double update_variance(const std::vector<WeightVector>& deltas) {
  const WeightVector mean = mean_delta(deltas);
  if (mean.size() == 0) return 0.0;
  double acc = 0.0;
  for (const auto& d : deltas) {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      const double e = d.values[k] - mean.values[k];
      acc += e * e;
    }
  }
  return acc / (static_cast<double>(deltas.size()) * static_cast<double>(mean.size()));
}

WeightVector quantize_int8(const WeightVector& delta) {
  double peak = 0.0;
  for (double x : delta.values) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) return delta;
  const double scale = peak / 127.0;
  WeightVector out{RVector(delta.size())};
  for (std::size_t k = 0; k < delta.size(); ++k) {
    const double q = std::clamp(std::round(delta.values[k] / scale), -127.0, 127.0);
    out.values[k] = q * scale;
  }
  return out;
}

Task union_task(const std::vector<Task>& tasks) {
  if (tasks.empty()) throw PreconditionError("union_task: no tasks");
  Task out;
  out.kind = tasks.front().kind;
  out.hidden = tasks.front().hidden;
  Index rows = 0;
  for (const auto& t : tasks) {
    if (t.kind != out.kind || t.input_dim() != tasks.front().input_dim() ||
        t.output_dim() != tasks.front().output_dim() || t.hidden != out.hidden) {
      throw DimensionError("union_task: incompatible tasks");
    }
    rows += t.features.rows();
  }
  out.features.resize(rows, tasks.front().features.cols());
  out.targets.resize(rows, tasks.front().targets.cols());
  Index r = 0;
  for (const auto& t : tasks) {
    out.features.middleRows(r, t.features.rows()) = t.features;
    out.targets.middleRows(r, t.targets.rows()) = t.targets;
    r += t.features.rows();
  }
  return out;
}

std::vector<Task> make_regression_tasks(std::size_t num_ues, std::size_t samples_per_ue,
                                        std::size_t dim, double heterogeneity, double noise_std,
                                        std::uint64_t seed, std::size_t outputs) {
  if (num_ues == 0 || samples_per_ue == 0 || dim == 0 || outputs == 0) {
    throw ConfigError("regression task sizes must be positive");
  }
  const auto d = static_cast<Index>(dim);
  const auto c = static_cast<Index>(outputs);
  Rng common_rng(derive_seed(seed, {0}));
  const double wscale = 1.0 / std::sqrt(static_cast<double>(dim));
  MatrixXd w_common(c, d);
  for (Index o = 0; o < c; ++o) {
    for (Index k = 0; k < d; ++k) w_common(o, k) = wscale * common_rng.normal();
  }
  VectorXd b_common(c);
  for (Index o = 0; o < c; ++o) b_common(o) = common_rng.normal() * 0.5;

  std::vector<Task> tasks;
  for (std::size_t ue = 0; ue < num_ues; ++ue) {
    Rng rng(derive_seed(seed, {1, ue}));
    MatrixXd w = w_common;
    for (Index o = 0; o < c; ++o) {
      for (Index k = 0; k < d; ++k) w(o, k) += heterogeneity * wscale * rng.normal();
    }
    VectorXd b = b_common;
    for (Index o = 0; o < c; ++o) b(o) += heterogeneity * 0.5 * rng.normal();
    Task t;
    t.kind = TaskKind::linear_regression;
    t.features.resize(static_cast<Index>(samples_per_ue), d);
    t.targets.resize(static_cast<Index>(samples_per_ue), c);
    for (Index r = 0; r < t.features.rows(); ++r) {
      for (Index k = 0; k < d; ++k) t.features(r, k) = rng.normal();
      for (Index o = 0; o < c; ++o) {
        t.targets(r, o) = t.features.row(r).dot(w.row(o)) + b(o) + noise_std * rng.normal();
      }
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<Task> make_blob_tasks(std::size_t num_ues, std::size_t samples_per_ue, std::size_t dim,
                                  std::size_t classes, std::size_t hidden, std::uint64_t seed) {
  if (num_ues == 0 || samples_per_ue == 0 || dim == 0 || classes < 2 || hidden == 0) {
    throw ConfigError("blob task sizes must be positive with at least two classes");
  }
  Rng common_rng(derive_seed(seed, {0}));
  MatrixXd centers(static_cast<Index>(classes), static_cast<Index>(dim));
  for (Index c = 0; c < centers.rows(); ++c) {
    for (Index k = 0; k < centers.cols(); ++k) centers(c, k) = 2.0 * common_rng.normal();
  }
  std::vector<Task> tasks;
  for (std::size_t ue = 0; ue < num_ues; ++ue) {
    Rng rng(derive_seed(seed, {1, ue}));
    RVector weights(classes);
    double total = 0.0;
    for (double& w : weights) {
      w = 0.2 + rng.uniform();
      total += w;
    }
    Task t;
    t.kind = TaskKind::two_layer_mlp_classification;
    t.hidden = hidden;
    t.features.resize(static_cast<Index>(samples_per_ue), static_cast<Index>(dim));
    t.targets = MatrixXd::Zero(static_cast<Index>(samples_per_ue), static_cast<Index>(classes));
    for (Index r = 0; r < t.features.rows(); ++r) {
      double u = rng.uniform() * total;
      std::size_t label = 0;
      while (label + 1 < classes && u >= weights[label]) u -= weights[label++];
      for (Index k = 0; k < t.features.cols(); ++k) {
        t.features(r, k) = centers(static_cast<Index>(label), k) + rng.normal();
      }
      t.targets(r, static_cast<Index>(label)) = 1.0;
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

ModelParams init_params(const Task& task, std::uint64_t seed) {
  ModelParams p{RVector(param_count(task), 0.0)};
  if (task.kind == TaskKind::linear_regression) return p;
  Rng rng(seed);
  const std::size_t d = task.input_dim();
  const std::size_t h = task.hidden;
  const std::size_t c = task.output_dim();
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t k = 0; k < h * d; ++k) p.theta[k] = s1 * rng.normal();
  const std::size_t w2 = h * d + h;
  for (std::size_t k = 0; k < c * h; ++k) p.theta[w2 + k] = s2 * rng.normal();
  return p;
}

Task load_task_table(const std::string& path, TaskKind kind, std::size_t target_columns,
                     std::size_t hidden) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task table '" + path + "'");
  std::vector<RVector> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    RVector row;
    double x = 0.0;
    while (ss >> x) row.push_back(x);
    if (!ss.eof()) throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("task table '" + path + "' is empty");
  const std::size_t cols = rows.front().size();
  if (target_columns == 0 || target_columns >= cols) throw ConfigError("task table needs feature and target columns");
  Task t;
  t.kind = kind;
  t.hidden = hidden;
  const std::size_t d = cols - target_columns;
  t.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
  t.targets.resize(static_cast<Index>(rows.size()), static_cast<Index>(target_columns));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c < d) {
        t.features(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
      } else {
        t.targets(static_cast<Index>(r), static_cast<Index>(c - d)) = rows[r][c];
      }
    }
  }
  t.validate();
  return t;
}

}  // namespace otafl::fl
