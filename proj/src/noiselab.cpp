#include <so3kit/noiselab.hpp>

#include <so3kit/decompositions.hpp>
#include <so3kit/ortho.hpp>
#include <so3kit/random.hpp>

#include <algorithm>
#include <cmath>
#include <thread>

namespace so3kit {

Mat3d first_order_svdo(const Mat3d& n) {
  return Mat3d::Identity() + split_sym_antisym(n).antisym;
}

Mat3d first_order_gs(const Mat3d& n) {
  const Mat3d lower = split_triangular(n).lower;
  return Mat3d::Identity() + lower - lower.transpose();
}

std::string noise_metric_name(NoiseMetric metric) {
  switch (metric) {
    case NoiseMetric::SvdoVsR: return "svdo_vs_R";
    case NoiseMetric::GsVsR: return "gs_vs_R";
    case NoiseMetric::SvdoVsM: return "svdo_vs_M";
    case NoiseMetric::GsVsM: return "gs_vs_M";
  }
  return "unknown";
}

double predicted_constant(NoiseMetric metric) {
  switch (metric) {
    case NoiseMetric::SvdoVsR: return 3.0;
    case NoiseMetric::GsVsR: return 6.0;
    case NoiseMetric::SvdoVsM: return 6.0;
    case NoiseMetric::GsVsM: return 9.0;
  }
  return 0.0;
}

void validate(const NoiseTrialConfig& cfg) {
  if (cfg.sigma_grid.empty()) throw ConfigError("sigma grid is empty");
  if (cfg.trials_per_sigma < 1) throw ConfigError("trials_per_sigma must be at least 1");
  double previous = 0.0;
  for (double s : cfg.sigma_grid) {
    if (!std::isfinite(s) || s <= 0.0) throw ConfigError("sigma values must be positive and finite");
    if (s <= previous) throw ConfigError("sigma grid must be strictly ascending");
    previous = s;
  }
}

namespace {

constexpr std::int64_t kBlockSize = 4096;

struct BlockSums {
  double sq[4] = {0, 0, 0, 0};
  std::int64_t used = 0;
  std::int64_t rank_deficient = 0;
};

/// Returns false when gs_plus rejects the sample.
bool run_trial(const Mat3d& r0, double sigma, std::uint64_t seed, std::uint64_t sigma_index, std::int64_t trial,
               double out[4]) {
  Rng rng(seed, {sigma_index, static_cast<std::uint64_t>(trial)});
  const Mat3d m = r0 + sigma * random_gaussian_mat3(rng);
  const Mat3d s = svdo_plus(m).matrix();
  Mat3d g;
  try {
    g = gs_plus(m).matrix();
  } catch (const RankDeficientError&) {
    return false;
  }
  out[0] = frob_dist_sq(s, r0);
  out[1] = frob_dist_sq(g, r0);
  out[2] = frob_dist_sq(s, m);
  out[3] = frob_dist_sq(g, m);
  return true;
}

}  // namespace

ErrorSummary run_noise_sweep(const NoiseTrialConfig& cfg) {
  validate(cfg);
  ErrorSummary summary;
  summary.seed = cfg.seed;
  const Mat3d r0 = cfg.base_rotation.matrix();
  const std::int64_t trials = cfg.trials_per_sigma;
  const std::int64_t num_blocks = (trials + kBlockSize - 1) / kBlockSize;
  const int workers = std::max(1, cfg.workers);

  for (std::size_t k = 0; k < cfg.sigma_grid.size(); ++k) {
    const double sigma = cfg.sigma_grid[k];
    std::vector<BlockSums> blocks(static_cast<std::size_t>(num_blocks));
    auto work = [&](int worker) {
      for (std::int64_t b = worker; b < num_blocks; b += workers) {
        BlockSums& acc = blocks[static_cast<std::size_t>(b)];
        const std::int64_t end = std::min(trials, (b + 1) * kBlockSize);
        for (std::int64_t t = b * kBlockSize; t < end; ++t) {
          double sq[4];
          if (!run_trial(r0, sigma, cfg.seed, k, t, sq)) {
            ++acc.rank_deficient;
            continue;
          }
          for (int i = 0; i < 4; ++i) acc.sq[i] += sq[i];
          ++acc.used;
        }
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& th : pool) th.join();
    }

    NoiseRecord rec;
    rec.sigma = sigma;
    rec.out_of_regime = sigma > kFirstOrderRegimeLimit;
    double total[4] = {0, 0, 0, 0};
    for (const BlockSums& b : blocks) {
      for (int i = 0; i < 4; ++i) total[i] += b.sq[i];
      rec.trials += b.used;
      rec.rank_deficient += b.rank_deficient;
    }
    for (int i = 0; i < 4; ++i) rec.mean_sq[i] = rec.trials > 0 ? total[i] / static_cast<double>(rec.trials) : 0.0;
    summary.records.push_back(rec);

    if (cfg.record_raw) {
      for (std::int64_t t = 0; t < trials && summary.raw.size() < kMaxRawRows; ++t) {
        RawTrial row;
        row.sigma = sigma;
        row.trial = t;
        if (run_trial(r0, sigma, cfg.seed, k, t, row.sq)) summary.raw.push_back(row);
      }
    }
  }
  return summary;
}

FirstOrderDecay measure_first_order_decay(Projector op, double sigma, int samples, std::uint64_t seed) {
  Rng rng(seed);
  FirstOrderDecay out;
  auto residual = [op](const Mat3d& n) {
    const Mat3d m = Mat3d::Identity() + n;
    if (op == Projector::Svdo) return (svdo(m).matrix() - first_order_svdo(n)).norm();
    return (gs(m).matrix() - first_order_gs(n)).norm();
  };
  for (int i = 0; i < samples; ++i) {
    const Mat3d n = random_gaussian_mat3(rng);
    out.error_at_sigma += residual(sigma * n);
    out.error_at_half_sigma += residual(0.5 * sigma * n);
  }
  out.error_at_sigma /= samples;
  out.error_at_half_sigma /= samples;
  return out;
}

}  // namespace so3kit
