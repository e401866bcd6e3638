#pragma once

// Command-line front end: subcommand dispatch, run manifests, CSV output and
// the gradient check.

#include <so3kit/backprop.hpp>
#include <so3kit/noiselab.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace so3kit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitMathDomain = 3;
inline constexpr int kExitDiverged = 4;

inline constexpr int kManifestSchemaVersion = 1;

std::string toolkit_version();

/// Record of one command invocation, written next to its outputs.
struct RunManifest {
  int schema_version = kManifestSchemaVersion;
  std::string command;
  std::string config_json = "{}";  ///< fully resolved flags as a JSON object
  std::uint64_t seed = 0;
  std::string version = toolkit_version();
  std::string started_at;   ///< UTC, ISO 8601
  std::string finished_at;  ///< UTC, ISO 8601
  std::vector<std::string> outputs;
};

std::string manifest_to_json(const RunManifest& manifest);
/// Throws Error on malformed input or an unknown schema version.
RunManifest manifest_from_json(const std::string& text);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_field(const std::string& value);

/// Shortest decimal form that round-trips a double.
std::string format_double(double value);

/// Header sigma,metric,empirical,predicted,trials,seed,in_regime and one
/// row per sigma and metric.
void write_noise_csv(std::ostream& out, const ErrorSummary& summary);

/// Header sigma,trial,svdo_vs_R,gs_vs_R,svdo_vs_M,gs_vs_M.
void write_raw_trials_csv(std::ostream& out, const ErrorSummary& summary);

/// Worker cap from SO3KIT_THREADS; 1 when unset. Throws ConfigError when
/// the value is not a positive integer.
int worker_count_from_env();

struct GradcheckConfig {
  int samples = 500;
  std::uint64_t seed = 0;
  double h = 1e-5;
  LossKind loss = LossKind::Frobenius;
};

struct GradcheckReport {
  int samples = 0;
  double max_error = 0.0;   ///< max entrywise |analytic - FD|
  double mean_error = 0.0;  ///< mean over samples of the per-sample max
  int degenerate_flags = 0;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Compares the svdo_plus loss gradient against central differences on
/// Gaussian M with s2 + s3 > 0.1 (and s2 - s3 > 0.1 when det M < 0), paired
/// with Haar-random targets.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

/// Runs one command line. argv[0] is the program name.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace so3kit::cli
