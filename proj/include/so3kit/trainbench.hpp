#pragma once

// Point-cloud alignment benchmark: synthetic datasets, a small PointNet-style
// regressor, training across rotation representations, and evaluation.

#include <so3kit/backprop.hpp>
#include <so3kit/repr.hpp>
#include <so3kit/rotation.hpp>
#include <so3kit/types.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace so3kit {

// ---------------------------------------------------------------------------
// Data

enum class ShapeFamily { Blobs, Boxes, Helices, Mixed };

std::string shape_family_name(ShapeFamily family);
std::optional<ShapeFamily> parse_shape_family(const std::string& name);

struct AlignmentSample {
  std::vector<Vec3d> source_points;
  std::vector<Vec3d> target_points;  ///< gt * source_points[i]
  Rot3 gt;
  std::uint64_t shape_id = 0;
};

using Dataset = std::vector<AlignmentSample>;

/// Each sample gets its own random shape from `family`, centred and scaled
/// to unit RMS radius, and a Haar-uniform rotation. Deterministic in `seed`.
/// Throws ConfigError when a count is below its minimum.
Dataset generate_dataset(std::uint64_t seed, int num_samples, int points_per_cloud,
                         ShapeFamily family = ShapeFamily::Mixed);

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// Moves the samples of the last `test_count` shape ids into the test set.
DatasetSplit split_dataset(Dataset data, int test_count);

/// Flat little-endian binary: magic "SO3D", uint32 version, uint64
/// num_samples, uint64 points_per_cloud, then per sample the row-major gt
/// (9 doubles), source (3N doubles) and target (3N doubles).
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Least-squares rotation taking source onto target: svdo_plus of the
/// cross-covariance sum target_i source_i^T.
Rot3 procrustes_rotation(const std::vector<Vec3d>& source, const std::vector<Vec3d>& target);

/// Largest pairwise distance within the cloud.
double cloud_diameter(const std::vector<Vec3d>& points);

// ---------------------------------------------------------------------------
// Network

/// Shared per-point encoder 3-64-64-64-128 with global max-pool, applied to
/// both clouds; head 256-128-64-D on the concatenated features. Leaky ReLU
/// (slope 0.01) after every layer except the last.
class TinyNet {
 public:
  using Real = float;
  using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix w;  ///< out x in
    Vector b;
  };

  /// Activations kept by forward for the backward pass.
  struct Cache {
    std::vector<Matrix> encoder;  ///< input points, then each encoder activation
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax;
    std::vector<Matrix> head;  ///< pooled features, then each hidden head activation
    int points_per_cloud = 0;
  };

  static constexpr int kNumEncoderLayers = 4;
  static constexpr int kNumHeadLayers = 3;
  static constexpr Real kLeakySlope = Real(0.01);

  TinyNet() = default;

  /// Fan-in scaled uniform weights, U(-sqrt(6 / fan_in), sqrt(6 / fan_in)); zero biases.
  TinyNet(int output_dim, std::uint64_t seed);

  int output_dim() const { return output_dim_; }

  /// `points` is 3 x (2 B N): for sample b, columns [2b N, (2b+1) N) hold the
  /// source cloud and the next N columns the target cloud. Returns D x B.
  Matrix forward(const Matrix& points, int points_per_cloud, Cache* cache = nullptr) const;

  /// Gradients of the loss with respect to every parameter, laid out like layers().
  std::vector<Layer> backward(const Cache& cache, const Matrix& grad_out) const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

 private:
  int output_dim_ = 0;
  std::vector<Layer> layers_;  ///< encoder layers followed by head layers
};

/// Packs the clouds of `samples[indices]` in the layout forward expects.
TinyNet::Matrix pack_clouds(const Dataset& data, const std::vector<std::size_t>& indices);

/// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(const TinyNet& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(TinyNet& net, const std::vector<TinyNet::Layer>& grads, double lr);

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<TinyNet::Layer> m_, v_;
};

// ---------------------------------------------------------------------------
// Training and evaluation

enum class TrainMode { Supervised, SelfSupervised, SvdInference };

std::string train_mode_name(TrainMode mode);  ///< "supervised", "selfsup", "svd-inference"
std::optional<TrainMode> parse_train_mode(const std::string& name);
std::string loss_kind_name(LossKind kind);  ///< "frob", "geodesic"
std::optional<LossKind> parse_loss_kind(const std::string& name);

struct LrDecay {
  double rate = 0.95;
  std::int64_t steps = 35000;
};

struct TrainConfig {
  ReprKind repr = ReprKind::NineD;
  TrainMode mode = TrainMode::Supervised;
  std::int64_t steps = 50000;
  int batch_size = 64;
  double lr = 1e-3;
  std::optional<LrDecay> lr_decay;
  LossKind loss = LossKind::Frobenius;
  std::uint64_t seed = 0;
  /// Evaluate on the test set every this many steps (0: only at the end).
  std::int64_t eval_every = 0;
  /// With 9D supervised training, the first warm_start_steps steps put the
  /// loss on the raw matrix (SVD-Inference) before switching to SVD-Train.
  std::int64_t warm_start_steps = 0;
};

/// Throws ConfigError for inconsistent settings, e.g. svd-inference with a
/// representation other than 9D.
void validate(const TrainConfig& cfg);

/// Learning rate at a step: lr * rate^(step / decay_steps).
double learning_rate(const TrainConfig& cfg, std::int64_t step);

struct EvalPoint {
  std::int64_t step = 0;
  double mean_deg = 0.0;
};

struct EvalReport {
  std::int64_t samples = 0;
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double std_deg = 0.0;
  /// 10th, 20th, ..., 100th percentile of the geodesic error.
  std::vector<double> percentiles_deg;
  /// RMS of ||R source_i - target_i|| over all test points.
  double registration_rmse = 0.0;
  double mean_cloud_diameter = 0.0;
  /// Outputs that could not be mapped to a rotation (scored as 180 degrees).
  std::int64_t invalid_outputs = 0;
  std::vector<EvalPoint> error_vs_step;
  /// Batch mean of the per-sample ||dL/dM||_F, one entry per step (9D only).
  std::vector<double> grad_norms;
};

/// Rotation predicted by one raw network output.
Rot3 predict_rotation(ReprKind kind, const ReprVector& raw);

/// Geodesic errors in degrees for a list of predicted rotations.
EvalReport summarize_errors(const std::vector<double>& errors_deg);

EvalReport evaluate(const TinyNet& net, ReprKind kind, const Dataset& test);

struct TrainResult {
  TinyNet net;
  EvalReport report;
  std::vector<double> losses;  ///< batch loss per step
  std::int64_t degenerate_steps = 0;
};

/// Throws DivergedError when the batch loss stops being finite.
TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& test_data);

// ---------------------------------------------------------------------------
// Serialization

std::string report_to_json(const EvalReport& report);
/// Rows: metric,value for the summary and percentiles, then step,mean_deg.
void write_report_csv(std::ostream& out, const EvalReport& report);

/// JSON object with every TrainConfig field, and its inverse.
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

struct Checkpoint {
  TrainConfig config;
  TinyNet net;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace so3kit
