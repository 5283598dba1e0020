#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "prism/model.hpp"

using namespace prism;

namespace {

RewardParams random_params(Arch arch, std::size_t p, std::size_t h, Rng& rng) {
  RewardParams out = zero_params(arch, p, h);
  for (auto& w : out.w_in) w = 0.5 * rng.normal();
  for (auto& w : out.b_hidden) w = 0.5 * rng.normal();
  for (auto& w : out.w_out) w = 0.5 * rng.normal();
  out.b_out = 0.5 * rng.normal();
  return out;
}

PreferenceBatch random_batch(std::size_t b, std::size_t p, std::size_t j, Rng& rng) {
  PreferenceBatch batch;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> iw(p), il(p), fw(j), fl(j);
    for (auto& x : iw) x = rng.normal();
    for (auto& x : il) x = rng.normal();
    for (auto& x : fw) x = rng.normal();
    for (auto& x : fl) x = rng.normal();
    batch.input_w.push_back(iw);
    batch.input_l.push_back(il);
    batch.feat_w.push_back(fw);
    batch.feat_l.push_back(fl);
  }
  return batch;
}

KernelMixConfig random_mix(std::size_t j, Rng& rng) {
  KernelMixConfig mix;
  for (std::size_t i = 0; i < j; ++i) {
    mix.logits.push_back(0.3 * rng.normal());
    mix.widths.push_back(0.5 + rng.uniform01());
  }
  return mix;
}

// max-norm relative error between analytic and central-difference gradients
double fd_rel_error(Arch arch, std::size_t b, std::size_t p, std::size_t j,
                    double l1, double l2, std::uint64_t seed) {
  Rng rng(seed);
  RewardParams params = random_params(arch, p, arch == Arch::linear ? 0 : 4, rng);
  PreferenceBatch batch = random_batch(b, p, j, rng);
  KernelMixConfig mix = random_mix(j, rng);

  auto [loss, grads] = prism_loss_gradients(batch, params, mix, l1, l2);
  std::vector<double> ga = flatten_grads(grads);

  std::vector<double> theta = flatten(params, mix.logits);
  const double h = 1e-5;
  std::vector<double> gn(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    RewardParams pp = params;
    KernelMixConfig mm = mix;
    std::vector<double> tp = theta;
    tp[k] += h;
    unflatten(tp, pp, mm.logits);
    double up = prism_loss(batch, pp, mm, l1, l2).total;
    tp[k] = theta[k] - h;
    unflatten(tp, pp, mm.logits);
    double dn = prism_loss(batch, pp, mm, l1, l2).total;
    gn[k] = (up - dn) / (2.0 * h);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    num = std::max(num, std::abs(ga[k] - gn[k]));
    den = std::max(den, std::abs(gn[k]));
  }
  return num / std::max(den, 1e-8);
}

}  // namespace

TEST_CASE("reward forward computes both architectures by hand") {
  RewardParams lin = zero_params(Arch::linear, 2, 0);
  lin.w_in = {1.0, 2.0};
  lin.b_out = 0.5;
  REQUIRE(reward_forward(lin, std::vector<double>{3.0, 4.0}) == 11.5);

  RewardParams mlp = zero_params(Arch::one_hidden_tanh, 2, 1);
  mlp.w_in = {1.0, 0.0};
  mlp.w_out = {2.0};
  mlp.b_out = 1.0;
  double expect = 2.0 * std::tanh(0.5) + 1.0;
  REQUIRE(reward_forward(mlp, std::vector<double>{0.5, 9.0}) ==
          Catch::Approx(expect).margin(1e-15));
  REQUIRE_THROWS_AS(reward_forward(lin, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("preference probability is a calibrated sigmoid") {
  REQUIRE(preference_prob(3.0, 3.0) == 0.5);
  REQUIRE(preference_prob(std::log(3.0), 0.0) == Catch::Approx(0.75).margin(1e-12));
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    double a = 10.0 * rng.normal(), b = 10.0 * rng.normal();
    REQUIRE(preference_prob(a, b) + preference_prob(b, a) ==
            Catch::Approx(1.0).margin(1e-12));
  }
  REQUIRE(preference_prob(1000.0, 0.0) == 1.0);  // saturates without NaN
  REQUIRE(preference_prob(-1000.0, 0.0) >= 0.0);
}

TEST_CASE("preference loss hits closed-form values") {
  std::vector<double> zeros{0.0, 0.0, 0.0};
  REQUIRE(bt_loss(zeros) == Catch::Approx(std::log(2.0)).margin(1e-12));
  std::vector<double> confident{20.0};
  REQUIRE(bt_loss(confident) < 1e-8);
  std::vector<double> wrong{-std::log(3.0)};
  REQUIRE(bt_loss(wrong) == Catch::Approx(std::log(4.0)).margin(1e-12));
  REQUIRE_THROWS_AS(bt_loss(std::vector<double>{}), DataError);
  // extreme margins stay finite
  REQUIRE(std::isfinite(bt_loss(std::vector<double>{-745.0})));
  REQUIRE(std::isfinite(bt_loss(std::vector<double>{745.0})));
}

TEST_CASE("pearson correlation matches hand calculations") {
  std::vector<double> a{1.0, 2.0, 3.0};
  std::vector<double> b{2.0, 4.0, 6.0};
  REQUIRE(pearson_corr(a, b) == Catch::Approx(1.0).margin(1e-6));
  std::vector<double> c{-1.0, -2.0, -3.0};
  REQUIRE(pearson_corr(a, c) == Catch::Approx(-1.0).margin(1e-6));
  std::vector<double> flat{5.0, 5.0, 5.0};
  REQUIRE(pearson_corr(a, flat) == 0.0);
  std::vector<double> d{1.0, 2.0, 2.0};
  REQUIRE(pearson_corr(a, d) == Catch::Approx(std::sqrt(3.0) / 2.0).margin(1e-6));
  REQUIRE_THROWS_AS(pearson_corr(a, std::vector<double>{1.0}), ShapeError);
  REQUIRE_THROWS_AS(pearson_corr(std::vector<double>{1.0}, std::vector<double>{1.0}),
                    DataError);
}

TEST_CASE("pearson correlation is affine invariant") {
  Rng rng(8);
  std::vector<double> a(50), b(50), scaled(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  double base = pearson_corr(a, b);
  for (std::size_t i = 0; i < 50; ++i) scaled[i] = 3.0 * b[i] + 7.0;
  REQUIRE(pearson_corr(a, scaled) == Catch::Approx(base).margin(1e-9));
  for (std::size_t i = 0; i < 50; ++i) scaled[i] = -2.0 * b[i];
  REQUIRE(pearson_corr(a, scaled) == Catch::Approx(-base).margin(1e-9));
}

TEST_CASE("decorrelation penalty sums squared correlations") {
  std::vector<double> r{1.0, 2.0, 3.0, 4.0};
  std::vector<std::vector<double>> fs{{1.0, 2.0, 3.0, 4.0}, {4.0, 3.0, 2.0, 1.0}};
  REQUIRE(global_decorrelation(r, fs) == Catch::Approx(2.0).margin(1e-6));
  std::vector<double> alt{1.0, -1.0, 1.0, -1.0};
  std::vector<std::vector<double>> orth{{1.0, 1.0, -1.0, -1.0}};
  REQUIRE(global_decorrelation(alt, orth) == 0.0);
  REQUIRE(global_decorrelation(r, {}) == 0.0);
}

TEST_CASE("zeroed penalties reduce the loss to plain preference loss bitwise") {
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    Arch arch = trial % 2 == 0 ? Arch::linear : Arch::one_hidden_tanh;
    RewardParams params = random_params(arch, 5, arch == Arch::linear ? 0 : 3, rng);
    PreferenceBatch batch = random_batch(4, 5, 2, rng);
    KernelMixConfig mix = random_mix(2, rng);
    std::vector<double> margins(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      margins[i] = reward_forward(params, batch.input_w[i]) -
                   reward_forward(params, batch.input_l[i]);
    LossBreakdown loss = prism_loss(batch, params, mix, 0.0, 0.0);
    REQUIRE(loss.total == bt_loss(margins));
    REQUIRE(loss.bt_term == loss.total);
    REQUIRE(loss.rglobal == 0.0);
  }
}

TEST_CASE("kernel penalty tightens the margin") {
  Rng rng(77);
  RewardParams params = random_params(Arch::linear, 4, 0, rng);
  PreferenceBatch batch = random_batch(8, 4, 2, rng);
  KernelMixConfig mix = random_mix(2, rng);
  double plain = prism_loss(batch, params, mix, 0.0, 0.0).bt_term;
  double pushed = prism_loss(batch, params, mix, 0.2, 0.0).bt_term;
  REQUIRE(pushed > plain);  // K_inv > 0 shrinks every margin
}

TEST_CASE("symmetric zero state has zero gradient") {
  RewardParams params = zero_params(Arch::linear, 3, 0);
  PreferenceBatch batch;
  // identical sides: margins and pooled reward spread vanish
  for (int i = 0; i < 3; ++i) {
    std::vector<double> x{1.0 * i, 2.0, -1.0};
    batch.input_w.push_back(x);
    batch.input_l.push_back(x);
    batch.feat_w.push_back({0.5});
    batch.feat_l.push_back({0.5});
  }
  KernelMixConfig mix;
  mix.logits = {0.0};
  mix.widths = {1.0};
  auto [loss, grads] = prism_loss_gradients(batch, params, mix, 0.1, 0.1);
  for (double g : flatten_grads(grads)) REQUIRE(g == 0.0);
  REQUIRE(loss.bt_term > 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  struct Config {
    Arch arch;
    double l1, l2;
    std::uint64_t seed;
  };
  std::vector<Config> sweep{
      {Arch::linear, 0.0, 0.0, 1},   {Arch::linear, 0.05, 0.05, 2},
      {Arch::linear, 0.1, 0.1, 3},   {Arch::one_hidden_tanh, 0.0, 0.0, 4},
      {Arch::one_hidden_tanh, 0.05, 0.05, 5},
      {Arch::one_hidden_tanh, 0.1, 0.1, 6},
      {Arch::linear, 0.1, 0.0, 7},   {Arch::one_hidden_tanh, 0.0, 0.1, 8},
  };
  for (const auto& c : sweep) {
    double err = fd_rel_error(c.arch, 6, 5, 2, c.l1, c.l2, c.seed);
    INFO("arch=" << (c.arch == Arch::linear ? "linear" : "tanh") << " l1=" << c.l1
                 << " l2=" << c.l2);
    REQUIRE(err <= 1e-4);
  }
}

TEST_CASE("batch validation rejects degenerate shapes") {
  Rng rng(3);
  RewardParams params = random_params(Arch::linear, 3, 0, rng);
  KernelMixConfig mix = random_mix(1, rng);
  PreferenceBatch single = random_batch(1, 3, 1, rng);
  REQUIRE_THROWS_AS(prism_loss(single, params, mix, 0.0, 0.0), DataError);
  PreferenceBatch ragged = random_batch(3, 3, 1, rng);
  ragged.input_l[1].push_back(0.0);
  REQUIRE_THROWS_AS(prism_loss(ragged, params, mix, 0.0, 0.0), ShapeError);
  PreferenceBatch wrong_mix = random_batch(3, 3, 2, rng);
  REQUIRE_THROWS_AS(prism_loss(wrong_mix, params, mix, 0.0, 0.0), ShapeError);
}

TEST_CASE("flatten and unflatten round trip") {
  Rng rng(10);
  for (Arch arch : {Arch::linear, Arch::one_hidden_tanh}) {
    RewardParams p = random_params(arch, 4, arch == Arch::linear ? 0 : 3, rng);
    std::vector<double> logits{0.1, -0.2};
    auto flat = flatten(p, logits);
    RewardParams q = zero_params(arch, 4, arch == Arch::linear ? 0 : 3);
    std::vector<double> logits2(2, 0.0);
    unflatten(flat, q, logits2);
    REQUIRE(q.w_in == p.w_in);
    REQUIRE(q.b_hidden == p.b_hidden);
    REQUIRE(q.w_out == p.w_out);
    REQUIRE(q.b_out == p.b_out);
    REQUIRE(logits2 == logits);
    flat.push_back(0.0);
    REQUIRE_THROWS_AS(unflatten(flat, q, logits2), ShapeError);
  }
}
