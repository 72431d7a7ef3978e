#include <cmath>
#include <filesystem>
#include <numbers>

#include "cfx/adapter/adapter.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cfx;

namespace {

std::vector<double> random_vec(nk::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("fresh policy does not shift and has the initial spread") {
  adapter::AdapterModel model({}, 1);
  nk::Rng rng(2);
  const auto d = model.policy_dist(random_vec(rng, 64));
  REQUIRE(d.mean.size() == 56);
  for (double m : d.mean) CHECK(m == 0.0);
  for (double s : d.std) CHECK(s == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("log density of the mean action") {
  adapter::ActionDist d{{0.1, -0.2, 0.3}, {0.5, 1.0, 2.0}};
  double expected = 0.0;
  for (double s : d.std) expected += -std::log(s * std::sqrt(2.0 * std::numbers::pi));
  CHECK(adapter::log_prob(d, d.mean) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(adapter::log_prob(d, {1.1, -0.2, 0.3}) == doctest::Approx(expected - 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(adapter::log_prob(d, {0.0}), adapter::AdapterError);
}

TEST_CASE("batched log density agrees with the closed form") {
  adapter::AdapterConfig cfg{6, 9, 4, 0.5};
  adapter::AdapterModel model(cfg, 3);
  nk::Rng rng(4);
  for (auto& [name, p] : model.params())
    for (auto& v : p.value.vec()) v += 0.3 * rng.normal();
  nk::Tensor h = nk::Tensor::matrix(5, 6), a = nk::Tensor::matrix(5, 4);
  for (auto& v : h.vec()) v = rng.normal();
  for (auto& v : a.vec()) v = rng.normal();
  nk::Tape tape(false);
  const auto lp = model.log_prob(tape, h, a, false).value();
  for (std::size_t r = 0; r < 5; ++r) {
    std::vector<double> hr(h.data().begin() + static_cast<long>(r * 6), h.data().begin() + static_cast<long>(r * 6 + 6));
    std::vector<double> ar(a.data().begin() + static_cast<long>(r * 4), a.data().begin() + static_cast<long>(r * 4 + 4));
    CHECK(lp[r] == doctest::Approx(adapter::log_prob(model.policy_dist(hr), ar)).epsilon(1e-12));
  }
}

TEST_CASE("policy and critic gradients match finite differences") {
  adapter::AdapterConfig cfg{5, 7, 3, 0.5};
  adapter::AdapterModel model(cfg, 9);
  nk::Rng rng(11);
  for (auto& [name, p] : model.params())
    for (auto& v : p.value.vec()) v += 0.2 * rng.normal();
  nk::Tensor h = nk::Tensor::matrix(4, 5), a = nk::Tensor::matrix(4, 3);
  for (auto& v : h.vec()) v = rng.normal();
  for (auto& v : a.vec()) v = rng.normal();
  auto lp = testing::gradcheck(model.params(), [&](nk::Tape& t) { return nk::sum(model.log_prob(t, h, a, true)); });
  INFO("policy worst: " << lp.worst);
  CHECK(lp.max_rel_err < 1e-4);
  auto v = testing::gradcheck(model.params(), [&](nk::Tape& t) { return nk::sum(nk::square(model.values(t, h, true))); });
  INFO("critic worst: " << v.worst);
  CHECK(v.max_rel_err < 1e-4);
}

TEST_CASE("critic value") {
  adapter::AdapterModel model({}, 5);
  nk::Rng rng(6);
  const auto h = random_vec(rng, 64);
  CHECK(model.critic_value(h) == model.critic_value(h));
  for (auto& [name, p] : model.params()) p.value.fill(0.0);
  CHECK(model.critic_value(h) == 0.0);
  CHECK_THROWS_AS(model.critic_value(std::vector<double>(3, 0.0)), adapter::AdapterError);
  auto bad = h;
  bad[0] = std::nan("");
  CHECK_THROWS_AS(model.policy_dist(bad), adapter::AdapterError);
}

TEST_CASE("latent shift is additive and leaves sigma alone") {
  genvae::LatentGaussian g{{0.1, 0.2, 0.3}, {-1.0, 0.0, 1.0}};
  const std::vector<double> a{0.5, -0.5, 0.25}, b{-0.125, 1.0, 2.0}, zero(3, 0.0);
  const auto same = adapter::shifted_latent(g, zero);
  CHECK(same.mu == g.mu);
  CHECK(same.log_sigma == g.log_sigma);
  const auto ab = adapter::shifted_latent(adapter::shifted_latent(g, a), b);
  std::vector<double> sum(3);
  for (int i = 0; i < 3; ++i) sum[i] = a[i] + b[i];
  const auto once = adapter::shifted_latent(g, sum);
  for (int i = 0; i < 3; ++i) CHECK(ab.mu[i] == doctest::Approx(once.mu[i]).epsilon(1e-15));
  CHECK(ab.log_sigma == g.log_sigma);
  CHECK_THROWS_AS(adapter::shifted_latent(g, {1.0}), adapter::AdapterError);
}

TEST_CASE("adapter checkpoint round trip") {
  adapter::AdapterModel model({8, 10, 4, 0.5}, 2);
  nk::Rng rng(1);
  for (auto& [name, p] : model.params())
    for (auto& v : p.value.vec()) v += 0.1 * rng.normal();
  for (auto& [name, p] : model.params()) nk::round_to_float(p.value);
  const auto path = std::filesystem::temp_directory_path() / "cfx_test_adapter.cfxm";
  model.save(path);
  const auto back = adapter::AdapterModel::load(path);
  const auto h = random_vec(rng, 8);
  CHECK(back.policy_dist(h).mean == model.policy_dist(h).mean);
  CHECK(back.critic_value(h) == model.critic_value(h));
  std::filesystem::remove(path);
}
