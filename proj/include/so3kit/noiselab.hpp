#pragma once

// Small-noise perturbation analysis of svdo_plus and gs_plus: first-order
// expansions and a seeded Monte Carlo sweep over noise levels.

#include <so3kit/rotation.hpp>
#include <so3kit/types.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace so3kit {

/// I + (N - N^T) / 2, the linear term of svdo(I + N).
Mat3d first_order_svdo(const Mat3d& n);

/// I + (L - L^T) with L the strictly lower part of N, the linear term of gs(I + N).
Mat3d first_order_gs(const Mat3d& n);

enum class NoiseMetric { SvdoVsR, GsVsR, SvdoVsM, GsVsM };

inline constexpr NoiseMetric kAllNoiseMetrics[] = {NoiseMetric::SvdoVsR, NoiseMetric::GsVsR, NoiseMetric::SvdoVsM,
                                                   NoiseMetric::GsVsM};

/// "svdo_vs_R", "gs_vs_R", "svdo_vs_M", "gs_vs_M".
std::string noise_metric_name(NoiseMetric metric);

/// Leading-order constant c with E[error] = c sigma^2: 3, 6, 6, 9.
double predicted_constant(NoiseMetric metric);

/// Largest sigma for which the first-order prediction is reported as in regime.
inline constexpr double kFirstOrderRegimeLimit = 0.1;

/// Maximum number of per-trial rows kept when raw recording is enabled.
inline constexpr std::size_t kMaxRawRows = 1'000'000;

struct NoiseTrialConfig {
  std::vector<double> sigma_grid;
  std::int64_t trials_per_sigma = 100000;
  std::uint64_t seed = 0;
  Rot3 base_rotation = Rot3::identity();
  bool record_raw = false;
  int workers = 1;
};

struct NoiseRecord {
  double sigma = 0.0;
  std::int64_t trials = 0;
  /// Trials dropped because gs_plus hit a rank-deficient input.
  std::int64_t rank_deficient = 0;
  double mean_sq[4] = {0, 0, 0, 0};  ///< indexed by NoiseMetric
  bool out_of_regime = false;

  double mean(NoiseMetric m) const { return mean_sq[static_cast<int>(m)]; }
  double predicted(NoiseMetric m) const { return predicted_constant(m) * sigma * sigma; }
};

struct RawTrial {
  double sigma = 0.0;
  std::int64_t trial = 0;
  double sq[4] = {0, 0, 0, 0};
};

struct ErrorSummary {
  std::uint64_t seed = 0;
  std::vector<NoiseRecord> records;
  std::vector<RawTrial> raw;
};

/// Throws ConfigError on an empty grid, a non-positive or non-ascending
/// sigma, or trials_per_sigma < 1.
void validate(const NoiseTrialConfig& cfg);

/// For each sigma, draws M = R0 + sigma N and averages the four squared
/// Frobenius errors. Trial t at grid index k uses the stream
/// derive_seed(seed, {k, t}), and partial sums are combined in a fixed
/// block order, so the result does not depend on cfg.workers.
ErrorSummary run_noise_sweep(const NoiseTrialConfig& cfg);

struct FirstOrderDecay {
  double error_at_sigma = 0.0;       ///< mean ||P(I + sigma N) - first_order(sigma N)||_F
  double error_at_half_sigma = 0.0;  ///< same with sigma / 2 and the same N
  double ratio() const { return error_at_sigma / error_at_half_sigma; }
};

enum class Projector { Svdo, Gs };

/// Second-order residual of the first-order expansion, measured at sigma
/// and sigma / 2 over `samples` Gaussian draws.
FirstOrderDecay measure_first_order_decay(Projector op, double sigma, int samples, std::uint64_t seed);

}  // namespace so3kit
