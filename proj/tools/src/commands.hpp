#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace chisep::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

// Config file plus the flags every command understands.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  // Loads the config file (if any) and applies the common overrides.
  RunConfig load(std::string* raw_text) const;
};

struct SimulateOptions {
  Common common;
  std::string out;
  std::optional<int> phantoms;
  std::optional<int> patch;
  std::optional<int> stride;
  std::optional<int> phantom_size;
  std::optional<double> noise;
  bool no_lesions = false;
};

struct PhantomOptions {
  Common common;
  std::string out;
  std::string kind = "brain";
  std::optional<int> size;
  int lesions = 0;  // extra lesions inserted into the brain phantom
};

struct TrainOptions {
  Common common;
  std::string data;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<int> base_channels;
  std::optional<std::string> precision;
  bool no_contrastive = false;
  bool keep_epochs = false;
};

struct InferOptions {
  Common common;
  std::string checkpoint;
  std::string input;
  std::string out;
  std::optional<int> window;
  std::optional<int> stride;
  bool clamp = false;
};

struct BaselineOptions {
  Common common;
  std::string input;
  std::string out;
  std::optional<int> max_iters;
  std::optional<double> lambda;
  std::optional<double> w_field;
  std::optional<double> w_r2p;
  std::optional<double> tolerance;
};

struct EvalOptions {
  Common common;
  std::string reference;
  std::vector<std::string> methods;  // label=DIR
  std::string out;
  std::optional<std::string> mask_scope;
  std::string regression;  // "" or "single-vs-mixed"
  std::vector<std::string> profiles;  // x0,y0,z0:x1,y1,z1[:n]
  bool ablation = false;
  std::string with_cl;
  std::string without_cl;
  std::string test_data;
  std::string history;  // restrict the ablation test set to a history's validation indices
};

int cmd_simulate(const SimulateOptions& o);
int cmd_phantom(const PhantomOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_infer(const InferOptions& o);
int cmd_baseline(const BaselineOptions& o);
int cmd_eval(const EvalOptions& o);

}  // namespace chisep::cli
