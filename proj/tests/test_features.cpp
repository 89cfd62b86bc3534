#include <doctest.h>

#include "aps/features.hpp"
#include "test_util.hpp"

using namespace aps;

namespace {

DenseNet encoder_like(int in, Rng& rng) {
  DenseNet net;
  net.add_layer(in, 16, Activation::kElu);
  net.add_layer(16, kFeatureDim, Activation::kIdentity);
  init_uniform_fanin(net, rng);
  return net;
}

}  // namespace

TEST_CASE("encode: scaling, (2,0,0,0,0) normalizes to (1,0,0,0,0)") {
  // identity-ish net that passes its 5 inputs through
  DenseNet net;
  net.add_layer(5, 5, Activation::kIdentity);
  for (int i = 0; i < 5; ++i) net.layers[0].wt.at(i, i) = 1.0;
  const Vec phi = encode(net, Vec{2.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 1; i < 5; ++i) CHECK(phi[i] == 0.0);
}

TEST_CASE("encode: zero raw output hits the guarded denominator") {
  DenseNet net;
  net.add_layer(3, 5, Activation::kIdentity);  // all-zero weights
  ForwardScratch scratch;
  bool degenerate = false;
  const Vec phi = encode(net, Vec{1.0, 1.0, 1.0}, scratch, &degenerate);
  CHECK(degenerate);
  for (double v : phi) CHECK(v == 0.0);  // 0 / 1e-8
}

TEST_CASE("encode: unit norm over 1000 seeded random nets and inputs") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    DenseNet net = encoder_like(8, rng);
    const Vec obs = test_util::random_vec(rng, 8, 2.0);
    const Vec phi = encode(net, obs);
    CHECK(std::abs(l2_norm(phi) - 1.0) <= 1e-9);
  }
}

TEST_CASE("vmf_nll_loss: every phi equal to w gives the global minimum -1") {
  const TaskVector w{1.0, 0.0, 0.0, 0.0, 0.0};
  // raw features that normalize to w
  const std::vector<Vec> raws(4, Vec{3.0, 0.0, 0.0, 0.0, 0.0});
  const auto res = vmf_nll_loss(raws, w);
  CHECK(res.loss == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("vmf_nll_loss: orthogonal features give loss 0") {
  const TaskVector w{1.0, 0.0, 0.0, 0.0, 0.0};
  const std::vector<Vec> raws(3, Vec{0.0, 2.0, 0.0, 0.0, 0.0});
  CHECK(vmf_nll_loss(raws, w).loss == doctest::Approx(0.0));
}

TEST_CASE("vmf_nll_loss: batch {w, -w} averages to 0") {
  const TaskVector w{0.0, 1.0, 0.0, 0.0, 0.0};
  const std::vector<Vec> raws{{0.0, 5.0, 0.0, 0.0, 0.0}, {0.0, -5.0, 0.0, 0.0, 0.0}};
  CHECK(vmf_nll_loss(raws, w).loss == doctest::Approx(0.0));
}

TEST_CASE("vmf_nll_loss: empty batch is an error") {
  CHECK_THROWS_AS((void)vmf_nll_loss(std::vector<Vec>{}, TaskVector{1, 0, 0, 0, 0}),
                  ContractViolation);
}

TEST_CASE("vmf_nll_loss: bounded in [-1, 1] for any inputs (property)") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec> raws;
    const int b = 1 + rng.below(6);
    for (int i = 0; i < b; ++i) raws.push_back(test_util::random_vec(rng, kFeatureDim, 5.0));
    const TaskVector w = sample_task_vector(rng);
    const double loss = vmf_nll_loss(raws, w).loss;
    CHECK(loss >= -1.0 - 1e-12);
    CHECK(loss <= 1.0 + 1e-12);
  }
}

TEST_CASE("vmf_nll_loss gradient: matches finite differences through the normalization") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec> raws{test_util::random_vec(rng, kFeatureDim, 2.0),
                          test_util::random_vec(rng, kFeatureDim, 2.0)};
    const TaskVector w = sample_task_vector(rng);
    const auto res = vmf_nll_loss(raws, w);
    const double h = 1e-6;
    for (std::size_t b = 0; b < raws.size(); ++b) {
      for (int i = 0; i < kFeatureDim; ++i) {
        auto perturbed = raws;
        perturbed[b][i] += h;
        const double up = vmf_nll_loss(perturbed, w).loss;
        perturbed[b][i] -= 2 * h;
        const double down = vmf_nll_loss(perturbed, w).loss;
        const double fd = (up - down) / (2 * h);
        CHECK(test_util::rel_err(fd, res.d_raw[b][i]) < 1e-4);
      }
    }
  }
}

TEST_CASE("vmf gradient via encoder: end-to-end finite differences on net params") {
  // chain rule through normalize_backward into backward_acc
  Rng rng(21);
  DenseNet net = encoder_like(6, rng);
  const Vec obs = test_util::random_vec(rng, 6);
  const TaskVector w = sample_task_vector(rng);

  auto loss_of = [&](const DenseNet& n) {
    const Vec raw = forward(n, obs);
    return vmf_nll_loss({raw}, w).loss;
  };

  ForwardTrace trace;
  const Vec raw = forward_trace(net, obs, trace);
  const auto vmf = vmf_nll_loss({raw}, w);
  GradientBundle g = GradientBundle::zeros_like(net);
  backward_acc(net, trace, vmf.d_raw[0], g);

  const double h = 1e-6;
  int checked = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t i = 0; i < net.layers[l].wt.data.size(); i += 7) {
      const double saved = net.layers[l].wt.data[i];
      net.layers[l].wt.data[i] = saved + h;
      const double up = loss_of(net);
      net.layers[l].wt.data[i] = saved - h;
      const double down = loss_of(net);
      net.layers[l].wt.data[i] = saved;
      const double fd = (up - down) / (2 * h);
      CHECK(test_util::rel_err(fd, g.wt[l].data[i]) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("sample_task_vector: unit norm always, d = 5 default") {
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    const TaskVector w = sample_task_vector(rng);
    CHECK(w.size() == 5);
    CHECK(std::abs(l2_norm(w) - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS((void)sample_task_vector(rng, 0), ContractViolation);
}

TEST_CASE("sample_task_vector: coordinate means and correlations near zero (Monte Carlo)") {
  Rng rng(123);
  const int n = 100000;
  const int d = 5;
  std::vector<double> sums(d, 0.0);
  std::vector<double> cross(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < n; ++i) {
    const TaskVector w = sample_task_vector(rng, d);
    for (int a = 0; a < d; ++a) {
      sums[a] += w[a];
      for (int b = a + 1; b < d; ++b) cross[a * d + b] += w[a] * w[b];
    }
  }
  // per-coordinate variance on the sphere is 1/d, so the empirical mean of a
  // coordinate has sd sqrt(1/(d n))
  const double sd_mean = std::sqrt(1.0 / (d * static_cast<double>(n)));
  for (int a = 0; a < d; ++a) CHECK(std::abs(sums[a] / n) < 3.0 * sd_mean);
  const double sd_cross = std::sqrt(1.0 / (d * d * static_cast<double>(n)));
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      CHECK(std::abs(cross[a * d + b] / n) < 3.0 * sd_cross);
}

TEST_CASE("sample_task_vector: equal variance along two fixed directions") {
  Rng rng(321);
  const int n = 50000;
  Vec diag(5, 1.0 / std::sqrt(5.0));
  double var1 = 0.0, var2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const TaskVector w = sample_task_vector(rng);
    var1 += w[0] * w[0];
    const double p = dot(w, diag);
    var2 += p * p;
  }
  var1 /= n;
  var2 /= n;
  // both estimate 1/5
  CHECK(std::abs(var1 - var2) < 0.01);
  CHECK(var1 == doctest::Approx(0.2).epsilon(0.05));
}
