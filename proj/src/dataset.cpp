#include <so3kit/trainbench.hpp>

#include <so3kit/ortho.hpp>
#include <so3kit/random.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace so3kit {

std::string shape_family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::Blobs: return "blobs";
    case ShapeFamily::Boxes: return "boxes";
    case ShapeFamily::Helices: return "helices";
    case ShapeFamily::Mixed: return "mixed";
  }
  return "unknown";
}

std::optional<ShapeFamily> parse_shape_family(const std::string& name) {
  for (ShapeFamily f : {ShapeFamily::Blobs, ShapeFamily::Boxes, ShapeFamily::Helices, ShapeFamily::Mixed}) {
    if (shape_family_name(f) == name) return f;
  }
  return std::nullopt;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// Four solid ellipsoids of unequal size around jittered anchors of a fixed
// asymmetric layout.
std::vector<Vec3d> blob_shape(Rng& rng, int n) {
  static const Vec3d kAnchors[] = {{1.0, 0.0, 0.0}, {-0.5, 0.8, 0.0}, {-0.4, -0.6, 0.7}, {0.0, -0.2, -0.9}};
  static constexpr double kWeights[] = {0.4, 0.3, 0.2, 0.1};
  constexpr int k = 4;
  Vec3d centers[k], spreads[k];
  for (int c = 0; c < k; ++c) {
    centers[c] = kAnchors[c] + 0.1 * random_gaussian_vec3(rng);
    spreads[c] = Vec3d(uniform(rng, 0.1, 0.4), uniform(rng, 0.1, 0.4), uniform(rng, 0.1, 0.4));
  }
  std::vector<Vec3d> pts(n);
  double boundary = 0.0;
  int c = 0;
  for (int i = 0; i < n; ++i) {
    while (c + 1 < k && i >= (boundary + kWeights[c]) * n) boundary += kWeights[c++];
    const Vec3d dir = random_gaussian_vec3(rng).normalized();
    pts[i] = centers[c] + std::cbrt(rng.uniform()) * spreads[c].cwiseProduct(dir);
  }
  return pts;
}

// Surface of a box with distinct side lengths, plus a cluster at one corner
// so that the box symmetries do not make the rotation ambiguous.
std::vector<Vec3d> box_shape(Rng& rng, int n) {
  const Vec3d half(uniform(rng, 0.3, 0.6), uniform(rng, 0.6, 0.9), uniform(rng, 0.9, 1.2));
  const int marker = std::max(1, n / 4);
  std::vector<Vec3d> pts(n);
  for (int i = 0; i < n - marker; ++i) {
    Vec3d p(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const int face = static_cast<int>(rng.uniform_index(3));
    p(face) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    pts[i] = p.cwiseProduct(half);
  }
  for (int i = n - marker; i < n; ++i) pts[i] = 0.8 * half + 0.06 * random_gaussian_vec3(rng);
  return pts;
}

// Conical helix with a cluster at its wide end.
std::vector<Vec3d> helix_shape(Rng& rng, int n) {
  const double turns = uniform(rng, 1.25, 1.75);
  const double height = uniform(rng, 1.0, 2.0);
  const double r0 = uniform(rng, 0.1, 0.3);
  const double r1 = uniform(rng, 0.6, 1.0);
  const double phase = uniform(rng, -0.3, 0.3);
  const int marker = std::max(1, n / 5);
  auto at = [&](double t) {
    const double r = r0 + (r1 - r0) * t;
    const double a = phase + 2.0 * std::numbers::pi * turns * t;
    return Vec3d(r * std::cos(a), r * std::sin(a), height * (t - 0.5));
  };
  std::vector<Vec3d> pts(n);
  for (int i = 0; i < n - marker; ++i) {
    const double t = (i + rng.uniform()) / (n - marker);
    pts[i] = at(t) + 0.02 * random_gaussian_vec3(rng);
  }
  for (int i = n - marker; i < n; ++i) pts[i] = at(1.0) + 0.08 * random_gaussian_vec3(rng);
  return pts;
}

void normalize_cloud(std::vector<Vec3d>& pts) {
  Vec3d mean = Vec3d::Zero();
  for (const Vec3d& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double sq = 0.0;
  for (Vec3d& p : pts) {
    p -= mean;
    sq += p.squaredNorm();
  }
  const double scale = 1.0 / std::sqrt(sq / static_cast<double>(pts.size()));
  for (Vec3d& p : pts) p *= scale;
}

}  // namespace

Dataset generate_dataset(std::uint64_t seed, int num_samples, int points_per_cloud, ShapeFamily family) {
  if (num_samples < 1) throw ConfigError("num_samples must be at least 1");
  if (points_per_cloud < 3) throw ConfigError("points_per_cloud must be at least 3");
  Dataset data(static_cast<std::size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) {
    Rng rng(seed, {static_cast<std::uint64_t>(i)});
    ShapeFamily f = family;
    if (f == ShapeFamily::Mixed) f = static_cast<ShapeFamily>(rng.uniform_index(3));
    AlignmentSample& s = data[static_cast<std::size_t>(i)];
    switch (f) {
      case ShapeFamily::Blobs: s.source_points = blob_shape(rng, points_per_cloud); break;
      case ShapeFamily::Boxes: s.source_points = box_shape(rng, points_per_cloud); break;
      default: s.source_points = helix_shape(rng, points_per_cloud); break;
    }
    normalize_cloud(s.source_points);
    s.gt = random_rotation(rng);
    s.target_points.resize(s.source_points.size());
    for (std::size_t p = 0; p < s.source_points.size(); ++p) s.target_points[p] = s.gt * s.source_points[p];
    s.shape_id = static_cast<std::uint64_t>(i);
  }
  return data;
}

DatasetSplit split_dataset(Dataset data, int test_count) {
  if (test_count < 1 || static_cast<std::size_t>(test_count) >= data.size()) {
    throw ConfigError("test_count must leave at least one training sample");
  }
  std::stable_sort(data.begin(), data.end(),
                   [](const AlignmentSample& a, const AlignmentSample& b) { return a.shape_id < b.shape_id; });
  DatasetSplit out;
  const auto cut = data.end() - test_count;
  out.train.assign(std::make_move_iterator(data.begin()), std::make_move_iterator(cut));
  out.test.assign(std::make_move_iterator(cut), std::make_move_iterator(data.end()));
  return out;
}

namespace {

constexpr char kMagic[4] = {'S', 'O', '3', 'D'};

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("dataset file is truncated");
  return value;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  const std::uint64_t n = data.empty() ? 0 : data.front().source_points.size();
  out.write(kMagic, 4);
  put(out, kDatasetVersion);
  put(out, static_cast<std::uint64_t>(data.size()));
  put(out, n);
  for (const AlignmentSample& s : data) {
    if (s.source_points.size() != n || s.target_points.size() != n) {
      throw Error("all samples must have the same number of points");
    }
    for (int i = 0; i < 9; ++i) put(out, s.gt(i / 3, i % 3));
    for (const Vec3d& p : s.source_points) {
      for (int k = 0; k < 3; ++k) put(out, p(k));
    }
    for (const Vec3d& p : s.target_points) {
      for (int k = 0; k < 3; ++k) put(out, p(k));
    }
  }
  if (!out) throw Error("failed writing " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(path + " is not a dataset file");
  const auto version = get<std::uint32_t>(in);
  if (version != kDatasetVersion) throw Error("unsupported dataset version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in);
  const auto n = get<std::uint64_t>(in);
  Dataset data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    AlignmentSample& s = data[i];
    Mat3d gt;
    for (int k = 0; k < 9; ++k) gt(k / 3, k % 3) = get<double>(in);
    s.gt = Rot3::from_matrix(gt);
    s.source_points.resize(n);
    s.target_points.resize(n);
    for (Vec3d& p : s.source_points) {
      for (int k = 0; k < 3; ++k) p(k) = get<double>(in);
    }
    for (Vec3d& p : s.target_points) {
      for (int k = 0; k < 3; ++k) p(k) = get<double>(in);
    }
    s.shape_id = i;
  }
  return data;
}

Rot3 procrustes_rotation(const std::vector<Vec3d>& source, const std::vector<Vec3d>& target) {
  if (source.size() != target.size() || source.size() < 3) {
    throw std::invalid_argument("procrustes_rotation needs matching clouds of at least 3 points");
  }
  Mat3d h = Mat3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) h += target[i] * source[i].transpose();
  return svdo_plus(h);
}

double cloud_diameter(const std::vector<Vec3d>& points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::max(best, (points[i] - points[j]).squaredNorm());
  }
  return std::sqrt(best);
}

}  // namespace so3kit
