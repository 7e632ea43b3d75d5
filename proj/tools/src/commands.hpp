#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace acton::cli {

namespace fs = std::filesystem;

/// Record of one invocation, written next to the outputs.
class Manifest {
public:
  Manifest(std::string command, std::vector<std::string> argv);

  void config(nlohmann::json cfg) { config_ = std::move(cfg); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void input(const fs::path& path);
  void output(const fs::path& path);
  void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void write(const fs::path& dir) const;

private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
  std::chrono::steady_clock::time_point start_;
};

/// Options every subcommand accepts. `config` is the merged effective
/// configuration: defaults, then the --config file, then explicit flags.
struct Run {
  nlohmann::json config;
  fs::path out;
  int threads = 1;
  bool deterministic = true;
  std::ostream* log = nullptr;
  Manifest* manifest = nullptr;
};

void run_synth(Run& r);
void run_vocab(Run& r);
void run_train_embed(Run& r);
void run_features(Run& r);
void run_train_linear(Run& r);
void run_train_cnn(Run& r, bool multi);
void run_infer(Run& r);
void run_eval(Run& r);
void run_gradcheck(Run& r);
void run_export(Run& r);

}  // namespace acton::cli
