#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "chisep/errors.hpp"
#include "commands.hpp"

namespace chisep::cli {
namespace {

Dims dims_value(const nlohmann::json& v, const char* what) {
  if (v.is_number_integer()) {
    const int n = v.get<int>();
    return {n, n, n};
  }
  const auto a = v.get<std::vector<int>>();
  if (a.size() != 3) throw InvalidArgument(std::string(what) + " must be an integer or [nx, ny, nz]");
  return {a[0], a[1], a[2]};
}

}  // namespace

nlohmann::json EvalConfig::to_json() const {
  return {{"mask_scope", brain_mask ? "brain" : "full"},
          {"hfen", {{"sigma", hfen.sigma}, {"size", hfen.size}}},
          {"xsim",
           {{"dynamic_range", xsim.dynamic_range},
            {"k1", xsim.k1},
            {"k2", xsim.k2},
            {"sigma", xsim.sigma},
            {"radius", xsim.radius}}}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
  EvalConfig e;
  for (const auto& [key, value] : j.items()) {
    if (key == "mask_scope") {
      const auto s = value.get<std::string>();
      if (s != "brain" && s != "full") throw InvalidArgument("eval.mask_scope must be 'brain' or 'full'");
      e.brain_mask = s == "brain";
    } else if (key == "hfen") {
      for (const auto& [k, v] : value.items()) {
        if (k == "sigma") e.hfen.sigma = v.get<double>();
        else if (k == "size") e.hfen.size = v.get<int>();
        else throw InvalidArgument("unknown eval.hfen key '" + k + "'");
      }
    } else if (key == "xsim") {
      for (const auto& [k, v] : value.items()) {
        if (k == "dynamic_range") e.xsim.dynamic_range = v.get<double>();
        else if (k == "k1") e.xsim.k1 = v.get<double>();
        else if (k == "k2") e.xsim.k2 = v.get<double>();
        else if (k == "sigma") e.xsim.sigma = v.get<double>();
        else if (k == "radius") e.xsim.radius = v.get<int>();
        else throw InvalidArgument("unknown eval.xsim key '" + k + "'");
      }
    } else {
      throw InvalidArgument("unknown eval key '" + key + "'");
    }
  }
  if (!(e.hfen.sigma > 0.0) || e.hfen.size < 3 || e.hfen.size % 2 == 0) {
    throw InvalidArgument("eval.hfen needs sigma > 0 and an odd size >= 3");
  }
  if (!(e.xsim.dynamic_range > 0.0) || !(e.xsim.sigma > 0.0) || e.xsim.radius < 1) {
    throw InvalidArgument("eval.xsim needs dynamic_range > 0, sigma > 0, radius >= 1");
  }
  return e;
}

void RunConfig::validate() const {
  if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
  if (phantoms < 1) throw InvalidArgument("phantoms must be >= 1");
  synth.validate();
  network.validate();
  train.validate();
  solver.validate();
  for (int a = 0; a < 3; ++a) {
    if (inference.window[a] < 8 || inference.window[a] % 8 != 0) {
      throw InvalidArgument("inference.window must be a multiple of 8, got " + to_string(inference.window));
    }
    if (inference.stride[a] < 0) throw InvalidArgument("inference.stride must be >= 0");
  }
}

nlohmann::json RunConfig::to_json() const {
  return {{"seed", seed},
          {"jobs", jobs},
          {"phantoms", phantoms},
          {"synth", synth.to_json()},
          {"network", network.to_json()},
          {"train", train.to_json()},
          {"solver", solver.to_json()},
          {"inference",
           {{"window", {inference.window.nx, inference.window.ny, inference.window.nz}},
            {"stride", {inference.stride[0], inference.stride[1], inference.stride[2]}},
            {"clamp", inference.clamp}}},
          {"eval", eval.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "jobs") c.jobs = value.get<int>();
    else if (key == "phantoms") c.phantoms = value.get<int>();
    else if (key == "synth") c.synth = SynthConfig::from_json(value);
    else if (key == "network") c.network = NetworkConfig::from_json(value);
    else if (key == "train") c.train = TrainConfig::from_json(value);
    else if (key == "solver") c.solver = SolverConfig::from_json(value);
    else if (key == "eval") c.eval = EvalConfig::from_json(value);
    else if (key == "inference") {
      for (const auto& [k, v] : value.items()) {
        if (k == "window") c.inference.window = dims_value(v, "inference.window");
        else if (k == "stride") {
          const Dims s = dims_value(v, "inference.stride");
          c.inference.stride = {s.nx, s.ny, s.nz};
        } else if (k == "clamp") c.inference.clamp = v.get<bool>();
        else throw InvalidArgument("unknown inference key '" + k + "'");
      }
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, std::string* raw_text) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (raw_text) *raw_text = ss.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return RunConfig::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config file " + path.string() + ": " + e.what());
  }
}

RunConfig Common::load(std::string* raw_text) const {
  RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path, raw_text);
  if (seed) {
    c.seed = *seed;
    c.train.seed = *seed;
  }
  if (jobs) {
    c.jobs = *jobs;
    c.synth.jobs = *jobs;
  }
  return c;
}

}  // namespace chisep::cli
