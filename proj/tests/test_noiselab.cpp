#include <doctest.h>

#include <so3kit/noiselab.hpp>
#include <so3kit/random.hpp>

#include <cmath>

using namespace so3kit;

TEST_CASE("first-order maps on structured perturbations") {
  Mat3d n;
  n << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Mat3d sym = n + n.transpose();
  const Mat3d anti = n - n.transpose();
  CHECK(first_order_svdo(sym) == Mat3d::Identity());
  CHECK(first_order_svdo(anti) == Mat3d(Mat3d::Identity() + anti));

  const Mat3d upper = n.triangularView<Eigen::Upper>();
  const Mat3d lower = n.triangularView<Eigen::StrictlyLower>();
  CHECK(first_order_gs(upper) == Mat3d::Identity());
  CHECK(first_order_gs(lower) == Mat3d(Mat3d::Identity() + lower - lower.transpose()));
}

TEST_CASE("first-order expansions are accurate to second order") {
  for (Projector op : {Projector::Svdo, Projector::Gs}) {
    for (double sigma : {1e-3, 1e-4}) {
      const auto d = measure_first_order_decay(op, sigma, 1000, 5);
      CHECK(d.ratio() == doctest::Approx(4.0).epsilon(0.125));
    }
  }
}

TEST_CASE("noise sweep config validation") {
  NoiseTrialConfig cfg;
  CHECK_THROWS_AS(run_noise_sweep(cfg), ConfigError);
  cfg.sigma_grid = {0.01, 0.001};
  CHECK_THROWS_AS(run_noise_sweep(cfg), ConfigError);
  cfg.sigma_grid = {-0.01};
  CHECK_THROWS_AS(run_noise_sweep(cfg), ConfigError);
  cfg.sigma_grid = {0.01};
  cfg.trials_per_sigma = 0;
  CHECK_THROWS_AS(run_noise_sweep(cfg), ConfigError);
}

TEST_CASE("noise sweep reproduces the expected error constants") {
  NoiseTrialConfig cfg;
  cfg.sigma_grid = {0.001, 0.01, 0.05};
  cfg.trials_per_sigma = 100000;
  cfg.seed = 7;
  const auto summary = run_noise_sweep(cfg);
  REQUIRE(summary.records.size() == 3);
  const double bands[] = {0.03, 0.05, 0.15};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& rec = summary.records[k];
    CHECK(rec.trials == 100000);
    CHECK_FALSE(rec.out_of_regime);
    for (NoiseMetric m : kAllNoiseMetrics) {
      INFO("sigma=" << rec.sigma << " metric=" << noise_metric_name(m));
      CHECK(rec.mean(m) / rec.predicted(m) == doctest::Approx(1.0).epsilon(bands[k]));
    }
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& rec = summary.records[k];
    const double r_ratio = rec.mean(NoiseMetric::GsVsR) / rec.mean(NoiseMetric::SvdoVsR);
    const double m_ratio = rec.mean(NoiseMetric::GsVsM) / rec.mean(NoiseMetric::SvdoVsM);
    CHECK(r_ratio >= 1.9);
    CHECK(r_ratio <= 2.1);
    CHECK(m_ratio >= 1.4);
    CHECK(m_ratio <= 1.6);
  }
}

TEST_CASE("noise sweep is independent of worker count and deterministic") {
  NoiseTrialConfig cfg;
  cfg.sigma_grid = {0.01, 0.02};
  cfg.trials_per_sigma = 10001;
  cfg.seed = 3;
  const auto a = run_noise_sweep(cfg);
  const auto b = run_noise_sweep(cfg);
  cfg.workers = 3;
  const auto c = run_noise_sweep(cfg);
  for (std::size_t k = 0; k < 2; ++k) {
    for (int i = 0; i < 4; ++i) {
      CHECK(a.records[k].mean_sq[i] == b.records[k].mean_sq[i]);
      CHECK(a.records[k].mean_sq[i] == c.records[k].mean_sq[i]);
    }
  }
}

TEST_CASE("noise sweep statistics do not depend on the base rotation") {
  NoiseTrialConfig cfg;
  cfg.sigma_grid = {0.01};
  cfg.trials_per_sigma = 100000;
  cfg.seed = 11;
  const auto at_identity = run_noise_sweep(cfg);
  Rng rng(12);
  cfg.base_rotation = random_rotation(rng);
  const auto rotated = run_noise_sweep(cfg);
  for (NoiseMetric m : kAllNoiseMetrics) {
    CHECK(rotated.records[0].mean(m) == doctest::Approx(at_identity.records[0].mean(m)).epsilon(0.02));
  }
}

TEST_CASE("large sigma is flagged and raw rows are capped by the trial count") {
  NoiseTrialConfig cfg;
  cfg.sigma_grid = {0.01, 0.5};
  cfg.trials_per_sigma = 100;
  cfg.record_raw = true;
  const auto s = run_noise_sweep(cfg);
  CHECK_FALSE(s.records[0].out_of_regime);
  CHECK(s.records[1].out_of_regime);
  CHECK(s.raw.size() == 200);
  double mean = 0.0;
  for (int t = 0; t < 100; ++t) mean += s.raw[t].sq[0];
  CHECK(mean / 100 == doctest::Approx(s.records[0].mean(NoiseMetric::SvdoVsR)).epsilon(1e-12));
}
