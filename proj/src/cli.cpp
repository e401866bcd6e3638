#include <so3kit/cli.hpp>

#include <so3kit/ortho.hpp>
#include <so3kit/random.hpp>
#include <so3kit/trainbench.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <sstream>

#ifndef SO3KIT_VERSION
#define SO3KIT_VERSION "0.0.0"
#endif

namespace so3kit::cli {

using nlohmann::json;

std::string toolkit_version() { return SO3KIT_VERSION; }

std::string manifest_to_json(const RunManifest& m) {
  json config;
  try {
    config = json::parse(m.config_json);
  } catch (const json::exception&) {
    throw Error("manifest config is not valid JSON");
  }
  const json j = {{"schema_version", m.schema_version},
                  {"command", m.command},
                  {"config", config},
                  {"seed", m.seed},
                  {"version", m.version},
                  {"started_at", m.started_at},
                  {"finished_at", m.finished_at},
                  {"outputs", m.outputs}};
  return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw Error("unsupported manifest schema version " + std::to_string(m.schema_version));
    }
    m.command = j.at("command").get<std::string>();
    m.config_json = j.at("config").dump();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_noise_csv(std::ostream& out, const ErrorSummary& summary) {
  out << "sigma,metric,empirical,predicted,trials,seed,in_regime\n";
  for (const NoiseRecord& r : summary.records) {
    for (NoiseMetric m : kAllNoiseMetrics) {
      out << format_double(r.sigma) << ',' << csv_field(noise_metric_name(m)) << ',' << format_double(r.mean(m))
          << ',' << format_double(r.predicted(m)) << ',' << r.trials - r.rank_deficient << ',' << summary.seed
          << ',' << (r.out_of_regime ? 0 : 1) << '\n';
    }
  }
}

void write_raw_trials_csv(std::ostream& out, const ErrorSummary& summary) {
  out << "sigma,trial";
  for (NoiseMetric m : kAllNoiseMetrics) out << ',' << csv_field(noise_metric_name(m));
  out << '\n';
  for (const RawTrial& t : summary.raw) {
    out << format_double(t.sigma) << ',' << t.trial;
    for (double v : t.sq) out << ',' << format_double(v);
    out << '\n';
  }
}

int worker_count_from_env() {
  const char* value = std::getenv("SO3KIT_THREADS");
  if (!value || !*value) return 1;
  int n = 0;
  const char* end = value + std::char_traits<char>::length(value);
  const auto res = std::from_chars(value, end, n);
  if (res.ec != std::errc() || res.ptr != end || n < 1) {
    throw ConfigError(std::string("SO3KIT_THREADS must be a positive integer, got '") + value + "'");
  }
  return n;
}

namespace {

bool well_conditioned(const Mat3d& m) {
  const Vec3d s = svd3(m).s;
  if (s(1) + s(2) <= 0.1) return false;
  return !(m.determinant() < 0 && s(1) - s(2) <= 0.1);
}

double composed_loss(const Mat3d& m, const Rot3& target, LossKind kind) {
  const Rot3 r = svdo_plus(m);
  return kind == LossKind::Frobenius ? frobenius_loss(r, target) : geodesic_loss(r, target);
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  if (cfg.samples < 1) throw ConfigError("samples must be at least 1");
  if (!(cfg.h > 0.0) || !std::isfinite(cfg.h)) throw ConfigError("h must be positive");
  GradcheckReport report;
  Rng rng(cfg.seed);
  double sum = 0.0;
  while (report.samples < cfg.samples) {
    const Mat3d m = random_gaussian_mat3(rng);
    const Rot3 target = random_rotation(rng);
    if (!well_conditioned(m)) continue;
    if (cfg.loss == LossKind::Geodesic) {
      const double theta = geodesic_angle(svdo_plus(m), target);
      if (theta < 0.05 || theta > std::numbers::pi - 0.05) continue;
    }
    const auto analytic = svdo_plus_loss(m, target, cfg.loss);
    auto f = [&](const Mat3d& x) { return composed_loss(x, target, cfg.loss); };
    const double err = (finite_difference_grad(f, m, cfg.h) - analytic.grad).cwiseAbs().maxCoeff();
    report.max_error = std::max(report.max_error, err);
    sum += err;
    if (analytic.degenerate) ++report.degenerate_flags;
    ++report.samples;
  }
  report.mean_error = sum / report.samples;
  return report;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double parse_number(const std::string& text) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
  double v = 0.0;
  const auto res = std::from_chars(begin, end, v);
  if (begin == end || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw UsageError("not a finite number: '" + text + "'");
  }
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(parse_number(item));
  if (!text.empty() && text.back() == ',') throw UsageError("trailing comma in '" + text + "'");
  return out;
}

Mat3d parse_matrix(const std::string& text) {
  std::string normalized = text;
  for (char& c : normalized) {
    if (std::isspace(static_cast<unsigned char>(c))) c = ',';
  }
  std::vector<double> values;
  std::string item;
  std::istringstream in(normalized);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) values.push_back(parse_number(item));
  }
  if (values.size() != 9) throw UsageError("expected 9 matrix entries, got " + std::to_string(values.size()));
  Mat3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = values[static_cast<std::size_t>(i)];
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

template <typename F>
void write_with(const std::string& path, F&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  body(out);
  if (!out) throw Error("failed writing " + path);
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void finish_manifest(RunManifest& m, const std::string& path) {
  m.finished_at = utc_timestamp();
  write_text(path, manifest_to_json(m) + "\n");
}

void print_report(std::ostream& out, const EvalReport& r) {
  out.setf(std::ios::fixed);
  out.precision(3);
  out << "samples " << r.samples << "\n";
  out << "mean_deg " << r.mean_deg << "\n";
  out << "median_deg " << r.median_deg << "\n";
  out << "std_deg " << r.std_deg << "\n";
  for (std::size_t i = 0; i < r.percentiles_deg.size(); ++i) {
    out << "p" << 10 * (i + 1) << "_deg " << r.percentiles_deg[i] << "\n";
  }
  out << "registration_rmse " << r.registration_rmse << "\n";
  out << "invalid_outputs " << r.invalid_outputs << "\n";
  out.unsetf(std::ios::fixed);
}

// ---------------------------------------------------------------------------

struct NoiseSweepFlags {
  std::string sigmas;
  std::int64_t trials = 100000;
  std::uint64_t seed = 0;
  std::string out;
  std::string raw_out;
  std::string manifest;
  std::string base_rotation = "identity";
};

int cmd_noise_sweep(const NoiseSweepFlags& f, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "noise-sweep";
  manifest.started_at = utc_timestamp();
  manifest.seed = f.seed;

  NoiseTrialConfig cfg;
  if (f.sigmas.empty()) throw UsageError("--sigmas must list at least one value");
  cfg.sigma_grid = parse_list(f.sigmas);
  cfg.trials_per_sigma = f.trials;
  cfg.seed = f.seed;
  cfg.workers = worker_count_from_env();
  cfg.record_raw = !f.raw_out.empty();
  if (f.base_rotation == "random") {
    Rng rng(f.seed, {0xB45E});
    cfg.base_rotation = random_rotation(rng);
  }
  validate(cfg);

  const ErrorSummary summary = run_noise_sweep(cfg);
  write_with(f.out, [&](std::ostream& os) { write_noise_csv(os, summary); });
  manifest.outputs.push_back(f.out);
  if (cfg.record_raw) {
    write_with(f.raw_out, [&](std::ostream& os) { write_raw_trials_csv(os, summary); });
    manifest.outputs.push_back(f.raw_out);
  }

  for (const NoiseRecord& r : summary.records) {
    out << "sigma " << format_double(r.sigma);
    for (NoiseMetric m : kAllNoiseMetrics) {
      out << "  " << noise_metric_name(m) << "/sigma^2 " << r.mean(m) / (r.sigma * r.sigma);
    }
    if (r.out_of_regime) out << "  (outside first-order regime)";
    out << "\n";
  }

  const std::string manifest_path = f.manifest.empty() ? f.out + ".manifest.json" : f.manifest;
  manifest.config_json = json{{"sigmas", cfg.sigma_grid},
                              {"trials", cfg.trials_per_sigma},
                              {"seed", cfg.seed},
                              {"base_rotation", f.base_rotation},
                              {"workers", cfg.workers},
                              {"out", f.out},
                              {"raw_out", f.raw_out}}
                             .dump();
  finish_manifest(manifest, manifest_path);
  return kExitOk;
}

struct ProjectFlags {
  std::string op;
  std::string matrix;
  bool from_stdin = false;
};

int cmd_project(const ProjectFlags& f, std::istream& in, std::ostream& out) {
  if (f.from_stdin == !f.matrix.empty()) throw UsageError("give exactly one of --matrix and --stdin");
  std::string text = f.matrix;
  if (f.from_stdin) text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  const Mat3d m = parse_matrix(text);
  if (!m.allFinite()) throw UsageError("matrix entries must be finite");

  Mat3d r;
  bool degenerate = false;
  if (f.op == "svdo") {
    r = svdo(m).matrix();
  } else if (f.op == "svdo+") {
    const auto p = svdo_plus_checked(m);
    r = p.rotation.matrix();
    degenerate = p.degenerate;
  } else if (f.op == "gs") {
    r = gs(m).matrix();
  } else {
    r = gs_plus(m).matrix();
  }
  for (int i = 0; i < 9; ++i) out << (i ? "," : "") << format_double(r(i / 3, i % 3));
  out << "\n";
  out << "det " << format_double(r.determinant()) << "\n";
  out << "residual " << format_double(orthogonality_residual(r)) << "\n";
  if (degenerate) out << "degenerate 1\n";
  return kExitOk;
}

struct GradcheckFlags {
  GradcheckConfig cfg;
  std::string loss = "frob";
};

int cmd_gradcheck(GradcheckFlags f, std::ostream& out) {
  f.cfg.loss = *parse_loss_kind(f.loss);
  const GradcheckReport r = run_gradcheck(f.cfg);
  out << "samples " << r.samples << "\n";
  out << "max_error " << format_double(r.max_error) << "\n";
  out << "mean_error " << format_double(r.mean_error) << "\n";
  out << "degenerate_flags " << r.degenerate_flags << "\n";
  const bool ok = r.max_error < kGradcheckTolerance;
  out << (ok ? "PASS" : "FAIL") << " (tolerance " << format_double(kGradcheckTolerance) << ")\n";
  return ok ? kExitOk : kExitRuntime;
}

struct GenDataFlags {
  std::uint64_t seed = 0;
  int samples = 10000;
  int points = 64;
  std::string family = "helices";
  std::string out;
  std::string manifest;
};

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.started_at = utc_timestamp();
  manifest.seed = f.seed;
  const ShapeFamily family = *parse_shape_family(f.family);
  const Dataset data = generate_dataset(f.seed, f.samples, f.points, family);
  write_dataset(f.out, data);
  manifest.outputs.push_back(f.out);
  manifest.config_json = json{{"seed", f.seed},
                              {"samples", f.samples},
                              {"points", f.points},
                              {"family", f.family},
                              {"out", f.out}}
                             .dump();
  finish_manifest(manifest, f.manifest.empty() ? f.out + ".manifest.json" : f.manifest);
  out << "wrote " << data.size() << " samples of " << f.points << " points to " << f.out << "\n";
  return kExitOk;
}

struct TrainFlags {
  std::string repr = "9d";
  std::string mode = "supervised";
  std::string loss = "frob";
  std::int64_t steps = 50000;
  int batch_size = 64;
  double lr = 1e-3;
  std::optional<double> lr_decay_rate;
  std::optional<std::int64_t> lr_decay_steps;
  std::int64_t warm_start_steps = 0;
  std::int64_t eval_every = 0;
  std::uint64_t seed = 0;
  std::string data;
  std::string test_data;
  int test_samples = 1000;
  std::uint64_t data_seed = 1;
  int samples = 10000;
  int points = 64;
  std::string family = "helices";
  std::string out;
};

TrainConfig resolve_train_config(const TrainFlags& f) {
  TrainConfig cfg;
  cfg.repr = *parse_repr_kind(f.repr);
  cfg.mode = *parse_train_mode(f.mode);
  cfg.loss = *parse_loss_kind(f.loss);
  cfg.steps = f.steps;
  cfg.batch_size = f.batch_size;
  cfg.lr = f.lr;
  if (f.lr_decay_rate || f.lr_decay_steps) {
    LrDecay decay;
    if (f.lr_decay_rate) decay.rate = *f.lr_decay_rate;
    if (f.lr_decay_steps) decay.steps = *f.lr_decay_steps;
    cfg.lr_decay = decay;
  }
  cfg.warm_start_steps = f.warm_start_steps;
  cfg.eval_every = f.eval_every;
  cfg.seed = f.seed;
  validate(cfg);
  return cfg;
}

DatasetSplit load_training_data(const TrainFlags& f) {
  if (!f.data.empty()) {
    Dataset data = read_dataset(f.data);
    if (!f.test_data.empty()) return {std::move(data), read_dataset(f.test_data)};
    return split_dataset(std::move(data), f.test_samples);
  }
  if (!f.test_data.empty()) throw UsageError("--test-data needs --data");
  if (f.samples < 1 || f.test_samples < 1) throw ConfigError("--samples and --test-samples must be positive");
  return split_dataset(generate_dataset(f.data_seed, f.samples + f.test_samples, f.points,
                                        *parse_shape_family(f.family)),
                       f.test_samples);
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.started_at = utc_timestamp();
  manifest.seed = f.seed;
  const TrainConfig cfg = resolve_train_config(f);
  const DatasetSplit split = load_training_data(f);
  ensure_directory(f.out);

  const TrainResult result = train(cfg, split.train, split.test);

  const std::string ckpt = join(f.out, "checkpoint.json");
  const std::string report_json = join(f.out, "report.json");
  const std::string report_csv = join(f.out, "report.csv");
  const std::string losses_csv = join(f.out, "losses.csv");
  save_checkpoint(ckpt, {cfg, result.net});
  write_text(report_json, report_to_json(result.report) + "\n");
  write_with(report_csv, [&](std::ostream& os) { write_report_csv(os, result.report); });
  write_with(losses_csv, [&](std::ostream& os) {
    os << "step,loss\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i) os << i + 1 << ',' << format_double(result.losses[i]) << '\n';
  });
  manifest.outputs = {ckpt, report_json, report_csv, losses_csv};
  if (!result.report.grad_norms.empty()) {
    const std::string grad_csv = join(f.out, "grad_norms.csv");
    write_with(grad_csv, [&](std::ostream& os) {
      os << "step,grad_norm\n";
      const auto& g = result.report.grad_norms;
      for (std::size_t i = 0; i < g.size(); ++i) os << i + 1 << ',' << format_double(g[i]) << '\n';
    });
    manifest.outputs.push_back(grad_csv);
  }

  json config = json::parse(train_config_to_json(cfg));
  config["data"] = f.data;
  config["test_data"] = f.test_data;
  config["train_samples"] = split.train.size();
  config["test_samples"] = split.test.size();
  if (f.data.empty()) {
    config["data_seed"] = f.data_seed;
    config["points"] = f.points;
    config["family"] = f.family;
  }
  manifest.config_json = config.dump();
  finish_manifest(manifest, join(f.out, "manifest.json"));

  out << "repr " << repr_name(cfg.repr) << "  mode " << train_mode_name(cfg.mode) << "  loss "
      << loss_kind_name(cfg.loss) << "  steps " << cfg.steps << "\n";
  if (result.degenerate_steps > 0) out << "degenerate_steps " << result.degenerate_steps << "\n";
  print_report(out, result.report);
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::string out;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "eval";
  manifest.started_at = utc_timestamp();
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  manifest.seed = ckpt.config.seed;
  const Dataset data = read_dataset(f.data);
  const EvalReport report = evaluate(ckpt.net, ckpt.config.repr, data);
  print_report(out, report);
  if (!f.out.empty()) {
    ensure_directory(f.out);
    const std::string report_json = join(f.out, "report.json");
    const std::string report_csv = join(f.out, "report.csv");
    write_text(report_json, report_to_json(report) + "\n");
    write_with(report_csv, [&](std::ostream& os) { write_report_csv(os, report); });
    manifest.outputs = {report_json, report_csv};
    manifest.config_json =
        json{{"checkpoint", f.checkpoint}, {"data", f.data}, {"repr", repr_name(ckpt.config.repr)}}.dump();
    finish_manifest(manifest, join(f.out, "manifest.json"));
  }
  return kExitOk;
}

std::vector<std::string> names_of(auto&& values, auto&& name) {
  std::vector<std::string> out;
  for (const auto& v : values) out.emplace_back(name(v));
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"so3kit: rotation projections, noise studies and rotation-regression benchmarks"};
  app.name(argc > 0 ? std::filesystem::path(argv[0]).filename().string() : "so3kit");
  app.require_subcommand(1);
  app.set_version_flag("--version", toolkit_version());

  const auto reprs = names_of(kAllReprKinds, [](ReprKind k) { return std::string(repr_name(k)); });
  const std::vector<std::string> modes = {"supervised", "selfsup", "svd-inference"};
  const std::vector<std::string> losses = {"frob", "geodesic"};
  const std::vector<std::string> families = {"blobs", "boxes", "helices", "mixed"};

  NoiseSweepFlags noise;
  auto* noise_cmd = app.add_subcommand("noise-sweep", "Monte Carlo projection error against first-order predictions");
  noise_cmd->add_option("--sigmas", noise.sigmas, "Comma-separated ascending noise levels")->required();
  noise_cmd->add_option("--trials", noise.trials, "Trials per sigma")->capture_default_str();
  noise_cmd->add_option("--seed", noise.seed, "Random seed")->capture_default_str();
  noise_cmd->add_option("--out", noise.out, "Summary CSV path")->required();
  noise_cmd->add_option("--raw-out", noise.raw_out, "Per-trial CSV path (at most 1M rows)");
  noise_cmd->add_option("--manifest", noise.manifest, "Manifest path (default: <out>.manifest.json)");
  noise_cmd->add_option("--base-rotation", noise.base_rotation, "Noise-free rotation R0")
      ->check(CLI::IsMember({"identity", "random"}))
      ->capture_default_str();

  ProjectFlags project;
  auto* project_cmd = app.add_subcommand("project", "Project one 3x3 matrix onto O(3) or SO(3)");
  project_cmd->add_option("--op", project.op, "Projection")
      ->required()
      ->check(CLI::IsMember({"svdo", "svdo+", "gs", "gs+"}));
  project_cmd->add_option("--matrix", project.matrix, "Nine comma-separated entries, row-major");
  project_cmd->add_flag("--stdin", project.from_stdin, "Read the nine entries from standard input");

  GradcheckFlags grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Check the svdo_plus backward pass against finite differences");
  grad_cmd->add_option("--samples", grad.cfg.samples, "Number of well-conditioned samples")->capture_default_str();
  grad_cmd->add_option("--seed", grad.cfg.seed, "Random seed")->capture_default_str();
  grad_cmd->set_help_flag("--help", "Print this help message and exit");
  grad_cmd->add_option("--h", grad.cfg.h, "Central difference step")->capture_default_str();
  grad_cmd->add_option("--loss", grad.loss, "Loss on the rotation")->check(CLI::IsMember(losses))->capture_default_str();

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic point-cloud alignment dataset");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--samples", gen.samples, "Number of samples")->capture_default_str();
  gen_cmd->add_option("--points", gen.points, "Points per cloud")->capture_default_str();
  gen_cmd->add_option("--family", gen.family, "Shape family")->check(CLI::IsMember(families))->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Dataset path")->required();
  gen_cmd->add_option("--manifest", gen.manifest, "Manifest path (default: <out>.manifest.json)");

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "Train the point-cloud regressor for one representation");
  train_cmd->add_option("--repr", tr.repr, "Rotation representation")->check(CLI::IsMember(reprs))->capture_default_str();
  train_cmd->add_option("--mode", tr.mode, "Training mode")->check(CLI::IsMember(modes))->capture_default_str();
  train_cmd->add_option("--loss", tr.loss, "Rotation loss")->check(CLI::IsMember(losses))->capture_default_str();
  train_cmd->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size, "Samples per step")->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--lr-decay-rate", tr.lr_decay_rate, "Exponential decay factor (enables decay)");
  train_cmd->add_option("--lr-decay-steps", tr.lr_decay_steps, "Steps per decay factor (enables decay)");
  train_cmd->add_option("--warm-start-steps", tr.warm_start_steps, "SVD-Inference steps before SVD-Train (9d)")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tr.eval_every, "Test-set evaluation interval (0: end only)")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  train_cmd->add_option("--data", tr.data, "Training dataset file (default: generate)");
  train_cmd->add_option("--test-data", tr.test_data, "Test dataset file (default: split from --data)");
  train_cmd->add_option("--test-samples", tr.test_samples, "Held-out samples when splitting")->capture_default_str();
  train_cmd->add_option("--data-seed", tr.data_seed, "Seed for generated data")->capture_default_str();
  train_cmd->add_option("--samples", tr.samples, "Generated training samples")->capture_default_str();
  train_cmd->add_option("--points", tr.points, "Points per generated cloud")->capture_default_str();
  train_cmd->add_option("--family", tr.family, "Generated shape family")->check(CLI::IsMember(families))
      ->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset file")->required();
  eval_cmd->add_option("--out", ev.out, "Output directory for report.json and report.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*noise_cmd) return cmd_noise_sweep(noise, out);
    if (*project_cmd) return cmd_project(project, in, out);
    if (*grad_cmd) return cmd_gradcheck(grad, out);
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(tr, out);
    if (*eval_cmd) return cmd_eval(ev, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const DegenerateInputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMathDomain;
  } catch (const NotOnManifoldError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMathDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace so3kit::cli
