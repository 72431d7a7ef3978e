#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "cfx/genvae/vae.hpp"
#include "cfx/numkit/params.hpp"
#include "cfx/numkit/rng.hpp"
#include "cfx/numkit/tape.hpp"

namespace cfx::adapter {

class AdapterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdapterConfig {
  std::size_t input = 64;  // encoder graph width
  std::size_t hidden = 400;
  std::size_t latent = 56;
  double init_std = 0.5;
};

struct ActionDist {
  std::vector<double> mean;
  std::vector<double> std;
};

// Diagonal Gaussian log-density.
double log_prob(const ActionDist& dist, const std::vector<double>& action);
std::vector<double> sample_action(const ActionDist& dist, nk::Rng& rng);

// mu <- mu + action; log_sigma untouched.
genvae::LatentGaussian shifted_latent(const genvae::LatentGaussian& g, const std::vector<double>& action);

// Policy: h_G -> tanh(400) -> mean shift, zero-initialized output layer and a
// state-independent log-std. Critic: h_G -> tanh(400) -> scalar.
class AdapterModel {
 public:
  AdapterModel(AdapterConfig config, std::uint64_t seed);

  const AdapterConfig& config() const { return config_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  ActionDist policy_dist(const std::vector<double>& h_graph) const;
  double critic_value(const std::vector<double>& h_graph) const;

  // Batched tape forms: h is [n, input], actions [n, latent]; both return [n, 1].
  nk::Var log_prob(nk::Tape& tape, const nk::Tensor& h, const nk::Tensor& actions, bool trainable) const;
  nk::Var values(nk::Tape& tape, const nk::Tensor& h, bool trainable) const;

  nk::NamedTensors export_tensors() const;
  void import_tensors(const nk::NamedTensors& tensors);
  void save(const std::filesystem::path& path) const;
  static AdapterModel load(const std::filesystem::path& path);

 private:
  nk::Var mean(nk::Tape& tape, nk::Var h, bool trainable) const;
  nk::Var bind(nk::Tape& tape, const std::string& name, bool trainable) const;
  void check_input(const std::vector<double>& h_graph) const;

  AdapterConfig config_;
  mutable nk::ParamStore params_;
};

}  // namespace cfx::adapter
