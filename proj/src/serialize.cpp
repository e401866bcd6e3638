#include <so3kit/trainbench.hpp>

#include <json.hpp>

#include <fstream>
#include <ostream>

namespace so3kit {

namespace {

using nlohmann::json;

constexpr int kCheckpointSchema = 1;

json config_json(const TrainConfig& cfg) {
  json j = {{"repr", repr_name(cfg.repr)},
            {"mode", train_mode_name(cfg.mode)},
            {"steps", cfg.steps},
            {"batch_size", cfg.batch_size},
            {"lr", cfg.lr},
            {"loss", loss_kind_name(cfg.loss)},
            {"seed", cfg.seed},
            {"eval_every", cfg.eval_every},
            {"warm_start_steps", cfg.warm_start_steps}};
  if (cfg.lr_decay) {
    j["lr_decay"] = {{"rate", cfg.lr_decay->rate}, {"steps", cfg.lr_decay->steps}};
  } else {
    j["lr_decay"] = nullptr;
  }
  return j;
}

template <typename T>
T parsed(const std::optional<T>& value, const std::string& what) {
  if (!value) throw ConfigError("unknown " + what);
  return *value;
}

TrainConfig config_from(const json& j) {
  TrainConfig cfg;
  try {
    cfg.repr = parsed(parse_repr_kind(j.at("repr").get<std::string>()), "representation");
    cfg.mode = parsed(parse_train_mode(j.at("mode").get<std::string>()), "mode");
    cfg.loss = parsed(parse_loss_kind(j.at("loss").get<std::string>()), "loss");
    cfg.steps = j.at("steps").get<std::int64_t>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.eval_every = j.at("eval_every").get<std::int64_t>();
    cfg.warm_start_steps = j.at("warm_start_steps").get<std::int64_t>();
    const json& decay = j.at("lr_decay");
    if (!decay.is_null()) cfg.lr_decay = LrDecay{decay.at("rate").get<double>(), decay.at("steps").get<std::int64_t>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

json report_json(const EvalReport& r) {
  json curve = json::array();
  for (const EvalPoint& p : r.error_vs_step) curve.push_back({{"step", p.step}, {"mean_deg", p.mean_deg}});
  json percentiles = json::object();
  for (std::size_t i = 0; i < r.percentiles_deg.size(); ++i) {
    percentiles[std::to_string(10 * (i + 1))] = r.percentiles_deg[i];
  }
  return {{"samples", r.samples},
          {"mean_deg", r.mean_deg},
          {"median_deg", r.median_deg},
          {"std_deg", r.std_deg},
          {"percentiles_deg", percentiles},
          {"registration_rmse", r.registration_rmse},
          {"mean_cloud_diameter", r.mean_cloud_diameter},
          {"invalid_outputs", r.invalid_outputs},
          {"error_vs_step", curve},
          {"grad_norms", r.grad_norms}};
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) { return config_json(cfg).dump(); }

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config_from(j);
}

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2); }

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out.precision(17);
  out << "metric,value\n";
  out << "samples," << r.samples << "\n";
  out << "mean_deg," << r.mean_deg << "\n";
  out << "median_deg," << r.median_deg << "\n";
  out << "std_deg," << r.std_deg << "\n";
  for (std::size_t i = 0; i < r.percentiles_deg.size(); ++i) {
    out << "p" << 10 * (i + 1) << "_deg," << r.percentiles_deg[i] << "\n";
  }
  out << "registration_rmse," << r.registration_rmse << "\n";
  out << "mean_cloud_diameter," << r.mean_cloud_diameter << "\n";
  out << "invalid_outputs," << r.invalid_outputs << "\n";
  out << "\nstep,mean_deg\n";
  for (const EvalPoint& p : r.error_vs_step) out << p.step << "," << p.mean_deg << "\n";
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json layers = json::array();
  for (const TinyNet::Layer& l : ckpt.net.layers()) {
    layers.push_back({{"rows", l.w.rows()},
                      {"cols", l.w.cols()},
                      {"w", std::vector<float>(l.w.data(), l.w.data() + l.w.size())},
                      {"b", std::vector<float>(l.b.data(), l.b.data() + l.b.size())}});
  }
  const json j = {{"schema_version", kCheckpointSchema},
                  {"config", config_json(ckpt.config)},
                  {"output_dim", ckpt.net.output_dim()},
                  {"layers", layers}};
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump();
  if (!out) throw Error("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Checkpoint ckpt;
  try {
    const json j = json::parse(in);
    if (j.at("schema_version").get<int>() != kCheckpointSchema) throw Error("unsupported checkpoint schema");
    ckpt.config = config_from(j.at("config"));
    ckpt.net = TinyNet(j.at("output_dim").get<int>(), 0);
    auto& layers = ckpt.net.layers();
    const json& stored = j.at("layers");
    if (stored.size() != layers.size()) throw Error("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto w = stored[i].at("w").get<std::vector<float>>();
      const auto b = stored[i].at("b").get<std::vector<float>>();
      if (stored[i].at("rows").get<Eigen::Index>() != layers[i].w.rows() ||
          stored[i].at("cols").get<Eigen::Index>() != layers[i].w.cols() ||
          static_cast<Eigen::Index>(w.size()) != layers[i].w.size() ||
          static_cast<Eigen::Index>(b.size()) != layers[i].b.size()) {
        throw Error("checkpoint layer shape mismatch");
      }
      layers[i].w = Eigen::Map<const TinyNet::Matrix>(w.data(), layers[i].w.rows(), layers[i].w.cols());
      layers[i].b = Eigen::Map<const TinyNet::Vector>(b.data(), layers[i].b.size());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
  return ckpt;
}

}  // namespace so3kit
