#include <so3kit/trainbench.hpp>

#include <so3kit/random.hpp>

#include <cmath>

namespace so3kit {

namespace {

using Real = TinyNet::Real;
using Matrix = TinyNet::Matrix;

constexpr int kEncoderWidths[] = {3, 64, 64, 64, 128};
constexpr int kPooledWidth = 128;

Matrix leaky(const Matrix& z) { return z.cwiseMax(TinyNet::kLeakySlope * z); }

/// Multiplies `grad` in place by the leaky ReLU derivative, read off the activation.
void leaky_backward(Matrix& grad, const Matrix& activation) {
  const Real slope = TinyNet::kLeakySlope;
  grad.array() *= (activation.array() > Real(0)).template cast<Real>() * (Real(1) - slope) + slope;
}

Matrix affine(const TinyNet::Layer& l, const Matrix& x) {
  Matrix z(l.w.rows(), x.cols());
  z.noalias() = l.w * x;
  z.colwise() += l.b;
  return z;
}

TinyNet::Layer zeros_like(const TinyNet::Layer& l) {
  return {Matrix::Zero(l.w.rows(), l.w.cols()), TinyNet::Vector::Zero(l.b.size())};
}

}  // namespace

TinyNet::TinyNet(int output_dim, std::uint64_t seed) : output_dim_(output_dim) {
  if (output_dim < 1) throw ConfigError("output dimension must be positive");
  Rng rng(seed);
  auto make = [&](int in, int out) {
    Layer l{Matrix(out, in), Vector::Zero(out)};
    const double bound = std::sqrt(6.0 / in);
    for (int j = 0; j < in; ++j) {
      for (int i = 0; i < out; ++i) l.w(i, j) = static_cast<Real>(bound * (2.0 * rng.uniform() - 1.0));
    }
    return l;
  };
  for (int i = 0; i < kNumEncoderLayers; ++i) layers_.push_back(make(kEncoderWidths[i], kEncoderWidths[i + 1]));
  layers_.push_back(make(2 * kPooledWidth, 128));
  layers_.push_back(make(128, 64));
  layers_.push_back(make(64, output_dim));
}

std::size_t TinyNet::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

Matrix TinyNet::forward(const Matrix& points, int points_per_cloud, Cache* cache) const {
  const int n = points_per_cloud;
  if (points.rows() != 3 || n < 1 || points.cols() % (2 * n) != 0) {
    throw std::invalid_argument("points must be 3 x (2 B N)");
  }
  const Eigen::Index clouds = points.cols() / n;
  const Eigen::Index batch = clouds / 2;

  Matrix a = points;
  if (cache) {
    cache->encoder.clear();
    cache->head.clear();
    cache->points_per_cloud = n;
  }
  for (int l = 0; l < kNumEncoderLayers; ++l) {
    Matrix next = leaky(affine(layers_[l], a));
    if (cache) cache->encoder.push_back(std::move(a));
    a = std::move(next);
  }

  Matrix pooled(kPooledWidth, clouds);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax(kPooledWidth, clouds);
  for (Eigen::Index c = 0; c < clouds; ++c) {
    const auto block = a.middleCols(c * n, n);
    for (int f = 0; f < kPooledWidth; ++f) {
      Eigen::Index j;
      pooled(f, c) = block.row(f).maxCoeff(&j);
      argmax(f, c) = static_cast<int>(j);
    }
  }

  Matrix h = Eigen::Map<const Matrix>(pooled.data(), 2 * kPooledWidth, batch);
  for (int l = 0; l < kNumHeadLayers; ++l) {
    const Layer& layer = layers_[kNumEncoderLayers + l];
    Matrix z = affine(layer, h);
    if (cache) cache->head.push_back(std::move(h));
    h = l + 1 < kNumHeadLayers ? leaky(z) : std::move(z);
  }
  if (cache) cache->argmax = std::move(argmax);
  return h;
}

std::vector<TinyNet::Layer> TinyNet::backward(const Cache& cache, const Matrix& grad_out) const {
  std::vector<Layer> grads;
  grads.reserve(layers_.size());
  for (const Layer& l : layers_) grads.push_back(zeros_like(l));

  // Head.
  Matrix delta = grad_out;
  for (int l = kNumHeadLayers - 1; l >= 0; --l) {
    const int idx = kNumEncoderLayers + l;
    const Matrix& input = cache.head[l];
    grads[idx].w.noalias() = delta * input.transpose();
    grads[idx].b = delta.rowwise().sum();
    Matrix back(input.rows(), input.cols());
    back.noalias() = layers_[idx].w.transpose() * delta;
    if (l > 0) leaky_backward(back, input);
    delta = std::move(back);
  }

  // Max-pool and the last encoder layer touch only the argmax columns.
  const int n = cache.points_per_cloud;
  const Eigen::Map<const Matrix> dpooled(delta.data(), kPooledWidth, delta.size() / kPooledWidth);
  const Eigen::Map<const Matrix> pooled(cache.head[0].data(), kPooledWidth, dpooled.cols());
  const Matrix& a3 = cache.encoder[kNumEncoderLayers - 1];
  const Layer& last = layers_[kNumEncoderLayers - 1];
  Layer& glast = grads[kNumEncoderLayers - 1];
  Matrix da = Matrix::Zero(a3.rows(), a3.cols());
  for (Eigen::Index c = 0; c < dpooled.cols(); ++c) {
    for (int f = 0; f < kPooledWidth; ++f) {
      const Real slope = pooled(f, c) > Real(0) ? Real(1) : kLeakySlope;
      const Real dz = dpooled(f, c) * slope;
      if (dz == Real(0)) continue;
      const Eigen::Index col = c * n + cache.argmax(f, c);
      glast.w.row(f) += dz * a3.col(col).transpose();
      glast.b(f) += dz;
      da.col(col) += dz * last.w.row(f).transpose();
    }
  }

  for (int l = kNumEncoderLayers - 2; l >= 0; --l) {
    const Matrix& output = cache.encoder[l + 1];
    leaky_backward(da, output);
    const Matrix& input = cache.encoder[l];
    grads[l].w.noalias() = da * input.transpose();
    grads[l].b = da.rowwise().sum();
    if (l == 0) break;
    Matrix back(input.rows(), input.cols());
    back.noalias() = layers_[l].w.transpose() * da;
    da = std::move(back);
  }
  return grads;
}

TinyNet::Matrix pack_clouds(const Dataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("pack_clouds needs at least one sample");
  const std::size_t n = data[indices.front()].source_points.size();
  Matrix out(3, static_cast<Eigen::Index>(2 * n * indices.size()));
  Eigen::Index col = 0;
  for (std::size_t idx : indices) {
    const AlignmentSample& s = data[idx];
    if (s.source_points.size() != n || s.target_points.size() != n) {
      throw std::invalid_argument("all clouds in a batch must have the same size");
    }
    for (const Vec3d& p : s.source_points) out.col(col++) = p.cast<Real>();
    for (const Vec3d& p : s.target_points) out.col(col++) = p.cast<Real>();
  }
  return out;
}

Adam::Adam(const TinyNet& net, double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const TinyNet::Layer& l : net.layers()) {
    m_.push_back(zeros_like(l));
    v_.push_back(zeros_like(l));
  }
}

void Adam::step(TinyNet& net, const std::vector<TinyNet::Layer>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const Real step = static_cast<Real>(lr * std::sqrt(c2) / c1);
  const Real eps = static_cast<Real>(eps_ * std::sqrt(c2));
  const Real b1 = static_cast<Real>(beta1_), b2 = static_cast<Real>(beta2_);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m.array() = b1 * m.array() + (Real(1) - b1) * g.array();
    v.array() = b2 * v.array() + (Real(1) - b2) * g.array().square();
    param.array() -= step * m.array() / (v.array().sqrt() + eps);
  };
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].w, grads[i].w, m_[i].w, v_[i].w);
    update(layers[i].b, grads[i].b, m_[i].b, v_[i].b);
  }
}

}  // namespace so3kit
