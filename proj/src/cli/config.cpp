#include "cfx/cli/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cfx::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("invalid value for " + key + ": '" + v + "'");
  return out;
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format(const std::string& v) { return v; }
std::string format(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string format(T v) {
  return std::to_string(v);
}

void parse_into(const std::string&, const std::string& v, std::string& out) { out = v; }
void parse_into(const std::string& key, const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes")
    out = true;
  else if (v == "false" || v == "0" || v == "no")
    out = false;
  else
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}
template <typename T>
void parse_into(const std::string& key, const std::string& v, T& out) {
  out = parse_number<T>(key, v);
}

template <typename T>
ConfigField field(std::string key, std::string help, T RunConfig::*member) {
  std::string k = key;
  return {std::move(key), std::move(help), [member](const RunConfig& c) { return format(c.*member); },
          [member, k](RunConfig& c, const std::string& v) { parse_into(k, v, c.*member); }};
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields{
      field("seed", "run seed (CFX_SEED when unset)", &RunConfig::seed),
      field("explain_class", "class whose predictions are explained", &RunConfig::explain_class),
      field("fp_radius", "fingerprint radius", &RunConfig::fp_radius),
      field("fp_nbits", "fingerprint width in bits", &RunConfig::fp_nbits),
      field("delta", "coverage distance threshold", &RunConfig::delta),
      field("alpha", "weight of the counterfactual probability", &RunConfig::alpha),
      field("beta", "weight of individual coverage", &RunConfig::beta),
      field("toy_count", "molecules in the toy dataset", &RunConfig::toy_count),
      field("min_element_count", "drop molecules with rarer elements", &RunConfig::min_element_count),
      field("gnn_hidden", "classifier width", &RunConfig::gnn_hidden),
      field("gnn_layers", "message-passing layers", &RunConfig::gnn_layers),
      field("gnn_update", "node update: concat or additive", &RunConfig::gnn_update),
      field("gnn_lr", "classifier learning rate", &RunConfig::gnn_lr),
      field("gnn_epochs", "classifier epochs", &RunConfig::gnn_epochs),
      field("gnn_batch", "classifier batch size", &RunConfig::gnn_batch),
      field("vocab_size", "fragment vocabulary size", &RunConfig::vocab_size),
      field("latent", "latent width", &RunConfig::latent),
      field("vae_lr", "generator learning rate", &RunConfig::vae_lr),
      field("vae_epochs", "generator epochs", &RunConfig::vae_epochs),
      field("vae_kl_weight", "KL weight during generator training", &RunConfig::vae_kl_weight),
      field("vae_batch", "generator batch size", &RunConfig::vae_batch),
      field("adapter_hidden", "adapter width", &RunConfig::adapter_hidden),
      field("adapter_lr", "adapter learning rate", &RunConfig::adapter_lr),
      field("adapter_updates", "PPO updates", &RunConfig::adapter_updates),
      field("inputs_per_update", "episodes per PPO update", &RunConfig::inputs_per_update),
      field("t_train", "episode length during training", &RunConfig::t_train),
      field("n_samples", "decodes per Q estimate", &RunConfig::n_samples),
      field("clip", "PPO clip range", &RunConfig::clip),
      field("ppo_epochs", "PPO epochs per update", &RunConfig::ppo_epochs),
      field("kl_limit", "KL guardrail", &RunConfig::kl_limit),
      field("ucb_c", "UCB exploration constant", &RunConfig::ucb_c),
      field("t_infer", "chain length at inference", &RunConfig::t_infer),
      field("k", "explanation set size", &RunConfig::k),
      field("decode", "decoding: beam or sample", &RunConfig::decode),
      field("beam", "beam width (sample mode: number of draws)", &RunConfig::beam),
      field("temperature", "sampling temperature", &RunConfig::temperature),
      field("selection", "set-coverage or modular", &RunConfig::selection),
      field("action", "adapter action at inference: sample or mean", &RunConfig::action),
      field("final_only", "keep only the last candidate of each chain", &RunConfig::final_only),
      field("sa_temperature", "initial annealing temperature", &RunConfig::sa_temperature),
      field("sa_period", "steps between temperature halvings", &RunConfig::sa_period),
      field("sa_from_input", "annealing proposals around the input", &RunConfig::sa_from_input),
      field("walk_steps", "random-walk edits per input", &RunConfig::walk_steps),
  };
  return fields;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : config_fields())
    if (f.key == key) return f.set(config, trim(value));
  throw ConfigError("unknown config key '" + key + "'");
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::string dump_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& f : config_fields()) out << f.key << " = " << f.get(config) << '\n';
  return out.str();
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.explain_class == 0 || c.explain_class == 1, "explain_class must be 0 or 1");
  need(c.fp_radius >= 0 && c.fp_nbits > 0, "fingerprint radius must be >= 0 and width positive");
  need(c.delta >= 0.0 && c.delta <= 1.0, "delta must lie in [0, 1]");
  need(c.alpha >= 0.0 && c.beta >= 0.0, "score weights must be non-negative");
  need(c.gnn_update == "concat" || c.gnn_update == "additive", "gnn_update must be concat or additive");
  need(c.gnn_hidden > 0 && c.gnn_layers >= 1 && c.gnn_epochs > 0 && c.gnn_lr > 0.0 && c.gnn_batch > 0,
       "classifier settings must be positive");
  need(c.vocab_size > 0 && c.latent > 0 && c.vae_epochs > 0 && c.vae_lr > 0.0 && c.vae_batch > 0,
       "generator settings must be positive");
  need(c.vae_kl_weight >= 0.0, "vae_kl_weight must be non-negative");
  need(c.adapter_hidden > 0 && c.adapter_lr > 0.0 && c.adapter_updates > 0 && c.inputs_per_update > 0,
       "adapter settings must be positive");
  need(c.t_train >= 1 && c.t_infer >= 1, "episode lengths must be at least 1");
  need(c.n_samples >= 1, "n_samples must be at least 1");
  need(c.clip > 0.0 && c.clip < 1.0, "clip must lie in (0, 1)");
  need(c.ppo_epochs >= 1 && c.kl_limit > 0.0 && c.ucb_c >= 0.0, "invalid PPO settings");
  need(c.k >= 1, "k must be at least 1");
  need(c.decode == "beam" || c.decode == "sample", "decode must be beam or sample");
  need(c.beam >= 1 && c.temperature > 0.0, "beam and temperature must be positive");
  need(c.selection == "set-coverage" || c.selection == "modular", "selection must be set-coverage or modular");
  need(c.action == "sample" || c.action == "mean", "action must be sample or mean");
  need(c.sa_temperature > 0.0 && c.sa_period >= 1, "annealing schedule must be positive");
  need(c.walk_steps >= 1, "walk_steps must be at least 1");
  need(c.toy_count >= 2, "toy_count must be at least 2");
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_fields()) j[f.key] = f.get(config);
  return j;
}

std::string hash_text(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& config) { return hash_text(to_json(config).dump()); }

}  // namespace cfx::cli
