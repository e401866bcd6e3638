#include <so3kit/trainbench.hpp>

#include <so3kit/ortho.hpp>
#include <so3kit/random.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace so3kit {

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Supervised: return "supervised";
    case TrainMode::SelfSupervised: return "selfsup";
    case TrainMode::SvdInference: return "svd-inference";
  }
  return "unknown";
}

std::optional<TrainMode> parse_train_mode(const std::string& name) {
  for (TrainMode m : {TrainMode::Supervised, TrainMode::SelfSupervised, TrainMode::SvdInference}) {
    if (train_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string loss_kind_name(LossKind kind) { return kind == LossKind::Frobenius ? "frob" : "geodesic"; }

std::optional<LossKind> parse_loss_kind(const std::string& name) {
  if (name == "frob") return LossKind::Frobenius;
  if (name == "geodesic") return LossKind::Geodesic;
  return std::nullopt;
}

void validate(const TrainConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("steps must be at least 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("learning rate must be positive");
  if (cfg.lr_decay) {
    if (!(cfg.lr_decay->rate > 0.0 && cfg.lr_decay->rate <= 1.0)) throw ConfigError("decay rate must be in (0, 1]");
    if (cfg.lr_decay->steps < 1) throw ConfigError("decay steps must be at least 1");
  }
  if (cfg.eval_every < 0) throw ConfigError("eval_every must be nonnegative");
  if (cfg.mode == TrainMode::SvdInference && cfg.repr != ReprKind::NineD) {
    throw ConfigError("svd-inference requires the 9d representation");
  }
  if (cfg.mode == TrainMode::SvdInference && cfg.loss != LossKind::Frobenius) {
    throw ConfigError("svd-inference applies the Frobenius loss to the raw matrix");
  }
  if (cfg.mode == TrainMode::SelfSupervised && cfg.loss != LossKind::Frobenius) {
    throw ConfigError("self-supervised training uses the point registration loss only");
  }
  if (cfg.warm_start_steps < 0) throw ConfigError("warm_start_steps must be nonnegative");
  if (cfg.warm_start_steps > 0) {
    if (cfg.repr != ReprKind::NineD || cfg.mode != TrainMode::Supervised || cfg.loss != LossKind::Frobenius) {
      throw ConfigError("warm start needs supervised 9d training with the Frobenius loss");
    }
  }
}

double learning_rate(const TrainConfig& cfg, std::int64_t step) {
  if (!cfg.lr_decay) return cfg.lr;
  return cfg.lr * std::pow(cfg.lr_decay->rate, static_cast<double>(step) / static_cast<double>(cfg.lr_decay->steps));
}

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Mat3d nine_d_matrix(const ReprVector& raw) {
  Mat3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = raw(i);
  return m;
}

ReprVector raw_column(const TinyNet::Matrix& out, Eigen::Index b) {
  return out.col(b).cast<double>();
}

/// Point registration loss mean_i ||R s_i - t_i||^2 and its gradient in R.
LossValue<double> registration_loss(const Mat3d& r, const AlignmentSample& s) {
  LossValue<double> out;
  const double inv_n = 1.0 / static_cast<double>(s.source_points.size());
  for (std::size_t i = 0; i < s.source_points.size(); ++i) {
    const Vec3d res = r * s.source_points[i] - s.target_points[i];
    out.value += res.squaredNorm() * inv_n;
    out.grad += 2.0 * inv_n * res * s.source_points[i].transpose();
  }
  return out;
}

struct SampleGrad {
  double loss = 0.0;
  ReprVector grad;
  double grad_norm_m = 0.0;  ///< ||dL/dM||_F for the 9D output
  bool degenerate = false;
};

SampleGrad sample_gradient(const TrainConfig& cfg, bool raw_matrix_loss, const ReprVector& raw,
                           const AlignmentSample& s) {
  SampleGrad out;
  out.grad = ReprVector::Zero(raw.size());
  auto upstream = [&](const Mat3d& r) {
    if (cfg.mode == TrainMode::SelfSupervised) return registration_loss(r, s);
    return rotation_loss(cfg.loss, r, s.gt.matrix());
  };

  if (cfg.repr == ReprKind::NineD) {
    const Mat3d m = nine_d_matrix(raw);
    Mat3d dm;
    if (raw_matrix_loss) {
      out.loss = 0.5 * (m - s.gt.matrix()).squaredNorm();
      dm = m - s.gt.matrix();
    } else {
      const auto fwd = svdo_plus_forward(m);
      const auto up = upstream(fwd.rotation.matrix());
      const auto back = svdo_plus_backward(fwd.context, up.grad);
      out.loss = up.value;
      dm = back.grad;
      out.degenerate = fwd.degenerate || back.degenerate;
    }
    for (int i = 0; i < 9; ++i) out.grad(i) = dm(i / 3, i % 3);
    out.grad_norm_m = dm.norm();
    return out;
  }

  ReprForward fwd;
  try {
    fwd = repr_forward(cfg.repr, raw);
  } catch (const DegenerateInputError&) {
    out.degenerate = true;
    return out;
  }
  const auto up = upstream(fwd.matrix);
  Eigen::Matrix<double, 9, 1> g;
  for (int i = 0; i < 9; ++i) g(i) = up.grad(i / 3, i % 3);
  out.loss = up.value;
  out.grad = fwd.jacobian.transpose() * g;
  return out;
}

double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Rot3 predict_rotation(ReprKind kind, const ReprVector& raw) {
  if (kind == ReprKind::NineD) return svdo_plus(nine_d_matrix(raw));
  return repr_to_rotation(RotationRepr(kind, raw));
}

EvalReport summarize_errors(const std::vector<double>& errors_deg) {
  EvalReport r;
  r.samples = static_cast<std::int64_t>(errors_deg.size());
  if (errors_deg.empty()) return r;
  std::vector<double> sorted = errors_deg;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double e : sorted) sum += e;
  r.mean_deg = sum / static_cast<double>(sorted.size());
  double var = 0.0;
  for (double e : sorted) var += (e - r.mean_deg) * (e - r.mean_deg);
  r.std_deg = std::sqrt(var / static_cast<double>(sorted.size()));
  r.median_deg = percentile(sorted, 50.0);
  for (int p = 10; p <= 100; p += 10) r.percentiles_deg.push_back(percentile(sorted, p));
  return r;
}

EvalReport evaluate(const TinyNet& net, ReprKind kind, const Dataset& test) {
  if (net.output_dim() != repr_dimension(kind)) throw ConfigError("network output does not match representation");
  if (test.empty()) throw ConfigError("test set is empty");
  constexpr std::size_t kChunk = 256;
  std::vector<double> errors;
  errors.reserve(test.size());
  double sq_sum = 0.0, diameter_sum = 0.0;
  std::size_t point_count = 0;
  std::int64_t invalid = 0;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(test.size(), start + kChunk); ++i) idx.push_back(i);
    const int n = static_cast<int>(test[idx.front()].source_points.size());
    const TinyNet::Matrix out = net.forward(pack_clouds(test, idx), n);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const AlignmentSample& s = test[idx[k]];
      diameter_sum += cloud_diameter(s.source_points);
      Rot3 pred;
      try {
        pred = predict_rotation(kind, raw_column(out, static_cast<Eigen::Index>(k)));
      } catch (const DegenerateInputError&) {
        ++invalid;
        errors.push_back(180.0);
        continue;
      }
      errors.push_back(geodesic_angle(pred, s.gt) * kRadToDeg);
      for (std::size_t p = 0; p < s.source_points.size(); ++p) {
        sq_sum += (pred * s.source_points[p] - s.target_points[p]).squaredNorm();
      }
      point_count += s.source_points.size();
    }
  }
  EvalReport r = summarize_errors(errors);
  r.invalid_outputs = invalid;
  r.registration_rmse = point_count > 0 ? std::sqrt(sq_sum / static_cast<double>(point_count)) : 0.0;
  r.mean_cloud_diameter = diameter_sum / static_cast<double>(test.size());
  return r;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& test_data) {
  validate(cfg);
  if (train_data.empty()) throw ConfigError("training set is empty");
  const int n = static_cast<int>(train_data.front().source_points.size());
  const int dim = repr_dimension(cfg.repr);

  TrainResult result;
  result.net = TinyNet(dim, derive_seed(cfg.seed, {0}));
  Adam adam(result.net);
  Rng batch_rng(cfg.seed, {1});
  result.losses.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<double> grad_norms;
  if (cfg.repr == ReprKind::NineD) grad_norms.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<EvalPoint> curve;

  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
  TinyNet::Cache cache;
  const double inv_batch = 1.0 / cfg.batch_size;
  double last_grad_norm = 0.0;

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    for (auto& i : idx) i = static_cast<std::size_t>(batch_rng.uniform_index(train_data.size()));
    const TinyNet::Matrix out = result.net.forward(pack_clouds(train_data, idx), n, &cache);
    if (!out.allFinite()) throw DivergedError(step, last_grad_norm);
    const bool raw_matrix_loss = cfg.mode == TrainMode::SvdInference || step < cfg.warm_start_steps;

    TinyNet::Matrix grad_out(dim, cfg.batch_size);
    double loss = 0.0, norm_sum = 0.0;
    bool degenerate = false;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SampleGrad g = sample_gradient(cfg, raw_matrix_loss, raw_column(out, b), train_data[idx[b]]);
      loss += g.loss * inv_batch;
      norm_sum += g.grad_norm_m;
      degenerate = degenerate || g.degenerate;
      grad_out.col(b) = (g.grad * inv_batch).cast<TinyNet::Real>();
    }
    last_grad_norm = static_cast<double>(grad_out.norm());
    if (!std::isfinite(loss) || !grad_out.allFinite()) throw DivergedError(step, last_grad_norm);
    if (degenerate) ++result.degenerate_steps;
    result.losses.push_back(loss);
    if (cfg.repr == ReprKind::NineD) grad_norms.push_back(norm_sum * inv_batch);

    adam.step(result.net, result.net.backward(cache, grad_out), learning_rate(cfg, step));

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < cfg.steps && !test_data.empty()) {
      curve.push_back({step + 1, evaluate(result.net, cfg.repr, test_data).mean_deg});
    }
  }

  if (!test_data.empty()) {
    result.report = evaluate(result.net, cfg.repr, test_data);
    curve.push_back({cfg.steps, result.report.mean_deg});
  }
  result.report.error_vs_step = std::move(curve);
  result.report.grad_norms = std::move(grad_norms);
  return result;
}

}  // namespace so3kit
