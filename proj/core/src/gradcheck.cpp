#include "laggre/gradcheck.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <random>

#include "laggre/encoder.hpp"
#include "laggre/rng.hpp"

namespace laggre {

namespace {

std::vector<double> gaussian_vector(Rng& rng, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(d);
  for (double& x : v) x = g(rng);
  return v;
}

std::vector<double> unit_vector(Rng& rng, std::size_t d) {
  const auto e = normalize(gaussian_vector(rng, d));
  return {e.values().begin(), e.values().end()};
}

// Random subset of [0, n) of the given size.
IndexSet random_subset(Rng& rng, std::size_t n, std::size_t size) {
  std::vector<IndexSet::value_type> all(n);
  std::iota(all.begin(), all.end(), 0u);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(size);
  return IndexSet::from_unsorted(std::move(all));
}

struct LaScenario {
  std::shared_ptr<const MemoryBank> bank;
  NeighborSets sets;
  Temperature tau;
};

// Background of random size; close set overlaps it partially so the loss is
// not identically zero.
LaScenario random_la_scenario(Rng& rng, std::size_t n, std::size_t d) {
  LaScenario s;
  s.bank = std::make_shared<const MemoryBank>(MemoryBank::init_random(n, d, rng()));
  s.tau = Temperature(std::uniform_real_distribution<double>(0.05, 1.0)(rng));
  const auto b_size = std::uniform_int_distribution<std::size_t>(2, n)(rng);
  s.sets.background = random_subset(rng, n, b_size);
  const auto anchor = s.sets.background[std::uniform_int_distribution<std::size_t>(0, b_size - 1)(rng)];
  const auto c_size = std::uniform_int_distribution<std::size_t>(1, n / 2)(rng);
  s.sets.close = with_index(random_subset(rng, n, c_size), anchor);
  if (set_intersection(s.sets.close, s.sets.background).size() == s.sets.background.size())
    s.sets.close = IndexSet{anchor};
  return s;
}

}  // namespace

FiniteDiffReport check_la_gradient(std::size_t trials, std::uint64_t seed, double h) {
  return finite_diff_check(
      [seed](std::size_t trial) {
        Rng rng(derive_seed(seed, {0x1a, trial}));
        const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
        auto s = random_la_scenario(rng, 50, d);
        GradProblem p;
        p.point = unit_vector(rng, d);
        p.loss = [s](std::span<const double> v) { return la_loss(v, s.sets, *s.bank, s.tau).value; };
        p.grad = [s](std::span<const double> v) { return la_grad_v(v, s.sets, *s.bank, s.tau); };
        return p;
      },
      trials, h);
}

FiniteDiffReport check_ir_gradient(std::size_t trials, std::uint64_t seed, double h) {
  return finite_diff_check(
      [seed](std::size_t trial) {
        Rng rng(derive_seed(seed, {0x12, trial}));
        const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
        auto bank = std::make_shared<const MemoryBank>(MemoryBank::init_random(n, d, rng()));
        const Temperature tau(std::uniform_real_distribution<double>(0.05, 1.0)(rng));
        const auto i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        GradProblem p;
        p.point = unit_vector(rng, d);
        p.loss = [=](std::span<const double> v) { return ir_loss(i, v, *bank, tau).value; };
        p.grad = [=](std::span<const double> v) { return ir_grad_v(i, v, *bank, tau); };
        return p;
      },
      trials, h);
}

FiniteDiffReport check_normalize_chain(std::size_t trials, std::uint64_t seed, double h) {
  return finite_diff_check(
      [seed](std::size_t trial) {
        Rng rng(derive_seed(seed, {0xc4, trial}));
        const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
        auto s = random_la_scenario(rng, 50, d);
        const double radius = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
        GradProblem p;
        p.point = unit_vector(rng, d);
        for (double& x : p.point) x *= radius;
        p.loss = [s](std::span<const double> z) { return la_loss(normalize(z), s.sets, *s.bank, s.tau).value; };
        p.grad = [s](std::span<const double> z) {
          return chain_through_normalize(la_grad_v(normalize(z), s.sets, *s.bank, s.tau), z);
        };
        return p;
      },
      trials, h);
}

namespace {

// ReLU activation pattern of every hidden layer.
std::vector<char> activation_mask(const EncoderParams& params, std::span<const double> x) {
  const auto fwd = forward(params, x);
  std::vector<char> mask;
  for (std::size_t l = 0; l + 1 < fwd.cache.pre.size(); ++l)
    for (double a : fwd.cache.pre[l]) mask.push_back(a > 0.0);
  return mask;
}

}  // namespace

FiniteDiffReport check_encoder_chain(std::size_t trials, std::uint64_t seed, double h) {
  return finite_diff_check(
      [seed](std::size_t trial) {
        Rng rng(derive_seed(seed, {0xe7, trial}));
        const std::size_t in = std::uniform_int_distribution<std::size_t>(3, 8)(rng);
        const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
        const std::vector<std::size_t> hidden{std::uniform_int_distribution<std::size_t>(4, 10)(rng),
                                              std::uniform_int_distribution<std::size_t>(3, 8)(rng)};
        auto init = EncoderParams::init(in, hidden, d, rng());
        std::normal_distribution<double> bias(0.0, 0.1);
        for (std::size_t l = 0; l < init.layer_count(); ++l)
          for (double& b : init.layer(l).bias) b = bias(rng);
        auto shape = std::make_shared<const EncoderParams>(std::move(init));
        auto s = random_la_scenario(rng, 30, d);
        auto x = std::make_shared<const std::vector<double>>(gaussian_vector(rng, in));

        auto with = [shape](std::span<const double> theta) {
          EncoderParams p = *shape;
          p.assign_flat(theta);
          return p;
        };
        GradProblem p;
        p.point = shape->to_flat();
        p.loss = [=](std::span<const double> theta) {
          return la_loss(normalize(encode(with(theta), *x)), s.sets, *s.bank, s.tau).value;
        };
        p.grad = [=](std::span<const double> theta) {
          const auto params = with(theta);
          const auto fwd = forward(params, *x);
          const auto g_v = la_grad_v(normalize(fwd.z), s.sets, *s.bank, s.tau);
          return backward(params, fwd.cache, chain_through_normalize(g_v, fwd.z)).to_flat();
        };
        p.smooth_at = [=](std::span<const double> theta, std::size_t c, double step) {
          std::vector<double> probe(theta.begin(), theta.end());
          const auto base = activation_mask(with(probe), *x);
          probe[c] = theta[c] + step;
          if (activation_mask(with(probe), *x) != base) return false;
          probe[c] = theta[c] - step;
          return activation_mask(with(probe), *x) == base;
        };
        return p;
      },
      trials, h);
}

std::vector<GradcheckEntry> run_gradient_checks(const GradcheckOptions& o) {
  std::vector<GradcheckEntry> out;
  out.push_back({"la_grad_v", check_la_gradient(o.trials, o.seed, o.h_loss), o.loss_threshold});
  out.push_back({"ir_grad_v", check_ir_gradient(o.trials, o.seed, o.h_loss), o.loss_threshold});
  out.push_back({"normalize_chain", check_normalize_chain(o.trials, o.seed, o.h_loss), o.loss_threshold});
  out.push_back({"encoder_chain", check_encoder_chain(o.trials, o.seed, o.h_encoder), o.encoder_threshold});
  return out;
}

}  // namespace laggre
