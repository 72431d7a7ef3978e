#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace cfx::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int explain_class = 1;  // class whose predictions are explained
  int fp_radius = 2;
  std::size_t fp_nbits = 2048;
  double delta = 0.87;
  double alpha = 1.0;
  double beta = 10.0;

  std::size_t toy_count = 500;
  std::size_t min_element_count = 50;

  std::size_t gnn_hidden = 64;
  int gnn_layers = 3;
  std::string gnn_update = "concat";  // concat | additive
  double gnn_lr = 1e-3;
  int gnn_epochs = 1000;
  std::size_t gnn_batch = 32;

  std::size_t vocab_size = 100;
  std::size_t latent = 56;
  double vae_lr = 3e-3;
  int vae_epochs = 60;
  double vae_kl_weight = 0.1;
  std::size_t vae_batch = 32;

  std::size_t adapter_hidden = 400;
  double adapter_lr = 1e-5;
  int adapter_updates = 40;
  std::size_t inputs_per_update = 8;
  int t_train = 4;
  int n_samples = 4;
  double clip = 0.2;
  int ppo_epochs = 4;
  double kl_limit = 0.5;
  double ucb_c = 1.0;

  int t_infer = 20;
  std::size_t k = 10;
  std::string decode = "beam";  // beam | sample
  int beam = 10;
  double temperature = 1.0;
  std::string selection = "set-coverage";  // set-coverage | modular
  std::string action = "sample";           // sample | mean
  bool final_only = false;

  double sa_temperature = 0.1;
  int sa_period = 10;
  bool sa_from_input = false;
  int walk_steps = 20;  // per input, so the total budget is walk_steps * |inputs|
};

struct ConfigField {
  std::string key;  // snake_case in files, kebab-case as a flag
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigField>& config_fields();

// Sets one key; unknown keys and unparsable values raise ConfigError.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// Flat "key = value" lines; '#' starts a comment.
void load_config_file(RunConfig& config, const std::filesystem::path& path);
std::string dump_config(const RunConfig& config);

void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string hash_text(const std::string& text);
std::string config_hash(const RunConfig& config);

}  // namespace cfx::cli
