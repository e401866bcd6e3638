// Acceptance suite: one PASS/FAIL line per criterion. With no arguments
// every criterion runs; otherwise pass a comma-separated list, e.g. "1,5,7".

#include <so3kit/cli.hpp>
#include <so3kit/noiselab.hpp>
#include <so3kit/ortho.hpp>
#include <so3kit/random.hpp>
#include <so3kit/trainbench.hpp>

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace so3kit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::vector<const char*> argv = {"so3kit"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::istringstream in;
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

// --- projection and noise criteria -----------------------------------------

Outcome noise_sweep_constants() {
  const fs::path dir = fs::temp_directory_path() / ("so3kit_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string csv = (dir / "sweep.csv").string();
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli({"noise-sweep", "--sigmas", "0.01", "--trials", "100000", "--seed", "2024", "--out", csv});
  const double elapsed = seconds_since(t0);
  if (code != 0) return {false, fmt("noise-sweep exited %d", code)};

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  const std::map<std::string, double> expected = {
      {"svdo_vs_R", 3.0}, {"gs_vs_R", 6.0}, {"svdo_vs_M", 6.0}, {"gs_vs_M", 9.0}};
  bool pass = elapsed < 30.0;
  std::string detail;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string sigma, metric, empirical;
    std::getline(s, sigma, ',');
    std::getline(s, metric, ',');
    std::getline(s, empirical, ',');
    const double sg = std::stod(sigma);
    const double ratio = std::stod(empirical) / (sg * sg);
    const double c = expected.at(metric);
    pass = pass && std::abs(ratio / c - 1.0) <= 0.05;
    detail += fmt("%s/s^2=%.4f (%g) ", metric.c_str(), ratio, c);
    ++rows;
  }
  fs::remove_all(dir);
  pass = pass && rows == 4;
  return {pass, detail + fmt("in %.2fs", elapsed)};
}

Outcome two_times_law() {
  NoiseTrialConfig cfg;
  cfg.sigma_grid = {0.001, 0.0025, 0.005, 0.01};
  cfg.trials_per_sigma = 100000;
  cfg.seed = 11;
  const ErrorSummary s = run_noise_sweep(cfg);
  bool pass = true;
  std::string detail;
  for (const NoiseRecord& r : s.records) {
    const double ratio = r.mean(NoiseMetric::GsVsR) / r.mean(NoiseMetric::SvdoVsR);
    pass = pass && ratio >= 1.9 && ratio <= 2.1;
    detail += fmt("sigma=%g ratio=%.4f ", r.sigma, ratio);
  }
  return {pass, detail};
}

Outcome first_order_decay() {
  const FirstOrderDecay d = measure_first_order_decay(Projector::Svdo, 1e-3, 1000, 5);
  const double ratio = d.ratio();
  return {std::abs(ratio - 4.0) <= 0.5,
          fmt("mean residual %.3e at 1e-3, %.3e at 5e-4, factor %.4f", d.error_at_sigma, d.error_at_half_sigma, ratio)};
}

Outcome gradcheck_default() {
  std::string text;
  const int code = run_cli({"gradcheck"}, &text);
  const auto pos = text.find("max_error ");
  if (pos == std::string::npos) return {false, fmt("gradcheck exited %d without a report", code)};
  const double max_error = std::stod(text.substr(pos + 10));
  return {code == 0 && max_error < 1e-4, fmt("exit %d, max error %.3e over 500 samples", code, max_error)};
}

Outcome procrustes_optimality() {
  int beaten = 0;
  double tightest = 1e300;
  for (int i = 0; i < 1000; ++i) {
    Rng rng(31, {static_cast<std::uint64_t>(i)});
    Mat3d m = random_gaussian_mat3(rng);
    while (std::abs(m.determinant()) < 1e-3) m = random_gaussian_mat3(rng);
    const double best = frob_dist_sq(svdo_plus(m).matrix(), m);
    double closest = 1e300;
    for (int k = 0; k < 10000; ++k) closest = std::min(closest, frob_dist_sq(random_rotation(rng).matrix(), m));
    if (best < closest) ++beaten;
    tightest = std::min(tightest, closest - best);
  }

  double vs_oracle = 0.0, vs_gt = 0.0;
  for (const AlignmentSample& s : generate_dataset(32, 1000, 32)) {
    const Rot3 r = procrustes_rotation(s.source_points, s.target_points);
    const Rot3 horn = Rot3::from_matrix(oracle::horn_rotation(s.source_points, s.target_points));
    vs_oracle = std::max(vs_oracle, geodesic_angle(r, horn));
    vs_gt = std::max(vs_gt, geodesic_angle(r, s.gt));
  }
  return {beaten == 1000 && vs_oracle < 1e-8 && vs_gt < 1e-8,
          fmt("beat 10K Haar rotations %d/1000 (smallest margin %.3e); alignment geodesic vs oracle %.2e, "
              "vs ground truth %.2e",
              beaten, tightest, vs_oracle, vs_gt)};
}

Outcome equivariance() {
  Rng rng(41);
  double svd_bi = 0.0, gs_left = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Mat3d m = random_gaussian_mat3(rng);
    const Mat3d r1 = random_rotation(rng).matrix();
    const Mat3d r2 = random_rotation(rng).matrix();
    svd_bi = std::max(svd_bi, (svdo_plus(r1 * m * r2).matrix() - r1 * svdo_plus(m).matrix() * r2).norm());
    gs_left = std::max(gs_left, (gs_plus(r1 * m).matrix() - r1 * gs_plus(m).matrix()).norm());
  }
  const Mat3d m = Vec3d(3.0, 2.0, 1.0).asDiagonal();
  const Mat3d r = oracle::rodrigues(Vec3d(0.3, -0.4, 0.5));
  const double right_gap = (gs_plus(m * r).matrix() - gs_plus(m).matrix() * r).norm();
  return {svd_bi < 1e-9 && gs_left < 1e-9 && right_gap > 1e-2,
          fmt("svdo_plus bi-equivariance %.2e, gs_plus left %.2e, gs_plus right gap on diag(3,2,1) %.3f", svd_bi,
              gs_left, right_gap)};
}

Outcome projection_validity() {
  Rng rng(51);
  double svd_orth = 0.0, svd_det = 0.0, gs_orth = 0.0, gs_det = 0.0;
  int skipped = 0;
  for (int i = 0; i < 100000; ++i) {
    const Mat3d m = random_gaussian_mat3(rng);
    const Mat3d r = svdo_plus(m).matrix();
    svd_orth = std::max(svd_orth, (r.transpose() * r - Mat3d::Identity()).cwiseAbs().maxCoeff());
    svd_det = std::max(svd_det, std::abs(r.determinant() - 1.0));
    try {
      const Mat3d q = gs_plus(m).matrix();
      gs_orth = std::max(gs_orth, (q.transpose() * q - Mat3d::Identity()).cwiseAbs().maxCoeff());
      gs_det = std::max(gs_det, std::abs(q.determinant() - 1.0));
    } catch (const RankDeficientError&) {
      ++skipped;
    }
  }
  const bool pass = svd_orth < 1e-9 && svd_det < 1e-9 && gs_orth < 1e-9 && gs_det < 1e-9;
  return {pass, fmt("svdo_plus |R^T R - I| %.2e, |det - 1| %.2e; gs_plus %.2e, %.2e (%d rank deficient)", svd_orth,
                    svd_det, gs_orth, gs_det, skipped)};
}

// --- training criteria ------------------------------------------------------

constexpr std::int64_t kSteps = 50000;
constexpr std::int64_t kWarmStartSteps = 2000;
constexpr double kMinutesBudget = 30.0;
constexpr int kPointsPerCloud = 64;

struct RunKey {
  ReprKind repr;
  TrainMode mode;
  LossKind loss;
  std::int64_t warm = 0;
  auto operator<=>(const RunKey&) const = default;
};

struct RunOutcome {
  EvalReport report;
  double minutes = 0.0;
};

class TrainingRuns {
 public:
  const RunOutcome& get(const RunKey& key) {
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    if (!split_) split_ = split_dataset(generate_dataset(1, 11000, kPointsPerCloud, ShapeFamily::Helices), 1000);
    TrainConfig cfg;
    cfg.repr = key.repr;
    cfg.mode = key.mode;
    cfg.loss = key.loss;
    cfg.steps = kSteps;
    cfg.seed = 7;
    cfg.warm_start_steps = key.warm;
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome r{train(cfg, split_->train, split_->test).report, seconds_since(t0) / 60.0};
    std::cout << fmt("    trained %s %s %s%s: mean %.3f deg, median %.3f deg, registration rmse %.4f "
                     "(cloud diameter %.3f), %.1f min\n",
                     std::string(repr_name(key.repr)).c_str(), train_mode_name(key.mode).c_str(),
                     loss_kind_name(key.loss).c_str(), key.warm ? " warm-start" : "", r.report.mean_deg,
                     r.report.median_deg, r.report.registration_rmse, r.report.mean_cloud_diameter, r.minutes)
              << std::flush;
    return runs_.emplace(key, std::move(r)).first->second;
  }

 private:
  std::optional<DatasetSplit> split_;
  std::map<RunKey, RunOutcome> runs_;
};

TrainingRuns& runs() {
  static TrainingRuns r;
  return r;
}

struct Ordered {
  bool ok = true;
  bool within_budget = true;
  std::string text;
};

Ordered ordering(TrainMode mode, LossKind loss, std::initializer_list<ReprKind> reprs) {
  Ordered o;
  double previous = -1.0;
  for (ReprKind k : reprs) {
    const RunOutcome& r = runs().get({k, mode, loss});
    if (previous >= 0.0 && !(previous <= r.report.mean_deg)) o.ok = false;
    o.within_budget = o.within_budget && r.minutes < kMinutesBudget;
    if (!o.text.empty()) o.text += " <= ";
    o.text += fmt("%s %.3f", std::string(repr_name(k)).c_str(), r.report.mean_deg);
    previous = r.report.mean_deg;
  }
  return o;
}

Outcome training_ordering() {
  const Ordered sup = ordering(TrainMode::Supervised, LossKind::Frobenius,
                               {ReprKind::NineD, ReprKind::SixD, ReprKind::Quaternion});
  const Ordered self = ordering(TrainMode::SelfSupervised, LossKind::Frobenius, {ReprKind::NineD, ReprKind::SixD});
  return {sup.ok && self.ok && sup.within_budget && self.within_budget,
          "supervised: " + sup.text + "; self-supervised: " + self.text +
              (sup.within_budget && self.within_budget ? "" : "; over the per-run time budget")};
}

Outcome geodesic_ordering() {
  const Ordered geo = ordering(TrainMode::Supervised, LossKind::Geodesic,
                               {ReprKind::NineD, ReprKind::SixD, ReprKind::Quaternion});
  return {geo.ok && geo.within_budget, "supervised geodesic: " + geo.text};
}

double mean_from(const std::vector<double>& v, std::int64_t start) {
  if (static_cast<std::int64_t>(v.size()) <= start) return 0.0;
  return std::accumulate(v.begin() + start, v.end(), 0.0) / static_cast<double>(v.size() - start);
}

Outcome warm_start_gradients() {
  const RunOutcome& cold = runs().get({ReprKind::NineD, TrainMode::Supervised, LossKind::Frobenius});
  const RunOutcome& warm = runs().get({ReprKind::NineD, TrainMode::Supervised, LossKind::Frobenius, kWarmStartSteps});
  const double c = mean_from(cold.report.grad_norms, kWarmStartSteps);
  const double w = mean_from(warm.report.grad_norms, kWarmStartSteps);
  return {w > 0.0 && w < c,
          fmt("mean ||dL/dM|| over steps %lld..%lld: warm start %.4e, cold %.4e (final mean %.3f vs %.3f deg)",
              static_cast<long long>(kWarmStartSteps), static_cast<long long>(kSteps), w, c, warm.report.mean_deg,
              cold.report.mean_deg)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "noise sweep constants at sigma 0.01", noise_sweep_constants},
      {2, "Gram-Schmidt error is twice SVD error", two_times_law},
      {3, "first-order expansion residual decays quadratically", first_order_decay},
      {4, "gradcheck default run", gradcheck_default},
      {5, "Procrustes optimality", procrustes_optimality},
      {6, "equivariance", equivariance},
      {7, "projection validity on 100K inputs", projection_validity},
      {8, "training ordering (Frobenius loss)", training_ordering},
      {9, "training ordering (geodesic loss)", geodesic_ordering},
      {10, "warm start lowers post-switch gradient norms", warm_start_gradients},
  };

  std::set<int> selected;
  if (argc > 1) {
    std::stringstream s(argv[1]);
    std::string item;
    while (std::getline(s, item, ',')) selected.insert(std::stoi(item));
  }

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << o.detail
              << fmt(" (%.1fs)", seconds_since(t0)) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
