#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hmc/diagnostics.hpp"
#include "hmc/rng.hpp"

using namespace hmc;

namespace {

// Stationary AR(1) chains with unit marginal variance.
Eigen::MatrixXd ar1_chains(int n, int chains, double phi, unsigned seed) {
  Rng rng(seed);
  Eigen::MatrixXd out(n, chains);
  const double innovation = std::sqrt(1.0 - phi * phi);
  for (int c = 0; c < chains; ++c) {
    double x = rng.normal();
    out(0, c) = x;
    for (int i = 1; i < n; ++i) {
      x = phi * x + innovation * rng.normal();
      out(i, c) = x;
    }
  }
  return out;
}

Eigen::MatrixXd iid_chains(int n, int chains, unsigned seed) {
  return ar1_chains(n, chains, 0.0, seed);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("the normal quantile matches high-precision reference values") {
  struct Case {
    double p, z;
  };
  const Case cases[] = {
      {0.5, 0.0},
      {0.75, 0.6744897501960817432022},
      {0.25, -0.6744897501960817432022},
      {0.975, 1.959963984540054235525},
      {0.995, 2.575829303548900760979},
      {0.999, 3.09023230616781354154},
      {0.0001, -3.719016485455680564394},
      {1e-9, -5.997807015007686871562},
  };
  for (const Case& c : cases)
    CHECK(std::abs(standard_normal_quantile(c.p) - c.z) < 1e-13);
}

TEST_CASE("the normal quantile is symmetric and inverts the cdf") {
  for (double p : {0.001, 0.02, 0.2, 0.4, 0.49, 0.77, 0.9999}) {
    CHECK(std::abs(standard_normal_quantile(p) +
                   standard_normal_quantile(1.0 - p)) < 1e-13);
    CHECK(std::abs(normal_cdf(standard_normal_quantile(p)) - p) < 1e-12);
  }
  CHECK_THROWS_AS(standard_normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(standard_normal_quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(standard_normal_quantile(-0.5), std::invalid_argument);
  CHECK_THROWS_AS(standard_normal_quantile(1.5), std::invalid_argument);
}

TEST_CASE("fractional ranks average ties and are one-based") {
  Eigen::VectorXd v(4);
  v << 10, 20, 20, 30;
  const Eigen::VectorXd r = fractional_ranks(v);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2.5);
  CHECK(r[2] == 2.5);
  CHECK(r[3] == 4.0);

  const Eigen::VectorXd flat = fractional_ranks(Eigen::VectorXd::Ones(5));
  for (int i = 0; i < 5; ++i) CHECK(flat[i] == 3.0);

  Eigen::VectorXd distinct(6);
  distinct << 3.5, -1, 0, 12, 7, -4;
  Eigen::VectorXd ranks = fractional_ranks(distinct);
  std::sort(ranks.data(), ranks.data() + ranks.size());
  for (int i = 0; i < 6; ++i) CHECK(ranks[i] == i + 1.0);
}

TEST_CASE("rank normalization preserves shape, order, and symmetry") {
  Eigen::MatrixXd chains(2, 2);
  chains << 1, 3, 2, 4;
  const Eigen::MatrixXd z = rank_normalized(chains);
  REQUIRE(z.rows() == 2);
  REQUIRE(z.cols() == 2);
  // Pooled ranks 1..4 over S = 4 values map through (r - 3/8) / (S + 1/4).
  CHECK(z(0, 0) ==
        doctest::Approx(standard_normal_quantile(0.625 / 4.25)).epsilon(1e-15));
  CHECK(z(1, 0) ==
        doctest::Approx(standard_normal_quantile(1.625 / 4.25)).epsilon(1e-15));
  // Symmetric ranks give symmetric scores; order is preserved.
  CHECK(std::abs(z(0, 0) + z(1, 1)) < 1e-14);
  CHECK(std::abs(z(1, 0) + z(0, 1)) < 1e-14);
  CHECK(z(0, 0) < z(1, 0));
  CHECK(z(1, 0) < z(0, 1));
}

TEST_CASE("splitting halves chains and drops the middle draw") {
  Eigen::MatrixXd chains(7, 2);
  for (int i = 0; i < 7; ++i) {
    chains(i, 0) = i;
    chains(i, 1) = 100 + i;
  }
  const Eigen::MatrixXd s = split_halves(chains);
  REQUIRE(s.rows() == 3);
  REQUIRE(s.cols() == 4);
  for (int i = 0; i < 3; ++i) {
    CHECK(s(i, 0) == i);          // first half of chain 0
    CHECK(s(i, 1) == 4 + i);      // second half; draw 3 dropped
    CHECK(s(i, 2) == 100 + i);
    CHECK(s(i, 3) == 104 + i);
  }

  const Eigen::MatrixXd even = split_halves(iid_chains(8, 1, 3));
  CHECK(even.rows() == 4);
  CHECK(even.cols() == 2);
}

TEST_CASE("independent draws report close to the nominal sample size") {
  const Eigen::MatrixXd chains = iid_chains(25000, 4, 101);
  const double ess = ess_bulk(chains);
  CHECK(ess > 0.9 * 100000);
  CHECK(ess < 1.1 * 100000);
}

TEST_CASE("positively correlated chains are discounted by the known factor") {
  // AR(1) with coefficient 0.5 has an effective sample fraction of 1/3.
  const Eigen::MatrixXd chains = ar1_chains(25000, 4, 0.5, 103);
  const double expected = 100000.0 / 3.0;
  const double ess = ess_bulk(chains);
  CHECK(ess > 0.85 * expected);
  CHECK(ess < 1.15 * expected);
}

TEST_CASE("anticorrelated chains cap at the retained draw count") {
  const Eigen::MatrixXd chains = ar1_chains(1000, 2, -0.9, 107);
  const EssResult r = ess_bulk_detailed(chains);
  CHECK(r.raw > 2000.0);
  CHECK(r.capped == 2000.0);
  CHECK(ess_bulk(chains) == 2000.0);
}

TEST_CASE("constant chains have undefined diagnostics") {
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(100, 4, 2.5);
  const EssResult r = ess_bulk_detailed(flat);
  CHECK(std::isnan(r.raw));
  CHECK(std::isnan(r.capped));
  CHECK(std::isnan(split_rhat(flat)));
}

TEST_CASE("an offset chain is flagged by the convergence statistic") {
  Eigen::MatrixXd chains = iid_chains(1000, 4, 109);
  chains.col(2).array() += 5.0;
  CHECK(split_rhat(chains) > 1.5);
}

TEST_CASE("well-mixed chains sit at the statistic's floor") {
  const Eigen::MatrixXd chains = iid_chains(1000, 4, 113);
  const double rhat = split_rhat(chains);
  CHECK(rhat < 1.01);
  CHECK(rhat > 0.99);

  const Eigen::MatrixXd single = iid_chains(2000, 1, 127);
  const double solo = split_rhat(single);
  CHECK(std::abs(solo - 1.0) < 0.02);
}

TEST_CASE("rank-based diagnostics are invariant to monotone transforms") {
  const Eigen::MatrixXd chains = ar1_chains(500, 4, 0.3, 131);
  const Eigen::MatrixXd expd = chains.array().exp().matrix();
  const Eigen::MatrixXd cubed = chains.array().cube().matrix();
  const double base_ess = ess_bulk(chains);
  CHECK(std::abs(ess_bulk(expd) - base_ess) < 1e-12 * base_ess);
  CHECK(std::abs(ess_bulk(cubed) - base_ess) < 1e-12 * base_ess);
  const double base_rhat = split_rhat(chains);
  CHECK(std::abs(split_rhat(expd) - base_rhat) < 1e-12);
  CHECK(std::abs(split_rhat(cubed) - base_rhat) < 1e-12);
}

TEST_CASE("diagnostics do not depend on chain labeling") {
  const Eigen::MatrixXd chains = ar1_chains(400, 4, 0.4, 137);
  Eigen::MatrixXd relabeled(400, 4);
  const int perm[4] = {2, 0, 3, 1};
  for (int c = 0; c < 4; ++c) relabeled.col(c) = chains.col(perm[c]);
  CHECK(std::abs(ess_bulk(relabeled) - ess_bulk(chains)) <
        1e-12 * ess_bulk(chains));
  CHECK(std::abs(split_rhat(relabeled) - split_rhat(chains)) < 1e-12);
}

TEST_CASE("strong positive correlation shrinks the raw estimate directly") {
  const Eigen::MatrixXd slow = ar1_chains(5000, 1, 0.95, 139);
  CHECK(geyer_ess(slow) < 1000.0);
  const Eigen::MatrixXd fast = iid_chains(5000, 1, 149);
  CHECK(geyer_ess(fast) > 3000.0);
}

TEST_CASE("input shape floors are enforced") {
  const Eigen::MatrixXd seven = iid_chains(7, 2, 151);
  CHECK_THROWS_AS(ess_bulk(seven), std::invalid_argument);
  CHECK_THROWS_AS(ess_bulk_detailed(seven), std::invalid_argument);
  const Eigen::MatrixXd three = iid_chains(3, 2, 157);
  CHECK_THROWS_AS(split_rhat(three), std::invalid_argument);
  CHECK_NOTHROW(ess_bulk(iid_chains(8, 2, 163)));
  CHECK_NOTHROW(split_rhat(iid_chains(4, 2, 167)));
}

TEST_CASE("the multi-chain summary aggregates per-parameter results") {
  Rng rng(173);
  const int n = 600, d = 3, chains = 4;
  std::vector<Eigen::MatrixXd> all;
  for (int c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(n, d);
    // Parameter 1 mixes slowly so it should set the minimum.
    m.col(0) = ar1_chains(n, 1, 0.1, 1000 + c);
    m.col(1) = ar1_chains(n, 1, 0.9, 2000 + c);
    m.col(2) = ar1_chains(n, 1, 0.5, 3000 + c);
    all.push_back(std::move(m));
  }
  const MultiChainSummary s = summarize_chains(all, 50000, 2.0);
  REQUIRE(s.parameters.size() == 3);

  // Brute-force the argmin over per-parameter capped ESS.
  int argmin = -1;
  double best = std::numeric_limits<double>::infinity();
  double max_rhat = 0.0;
  for (int j = 0; j < d; ++j) {
    Eigen::MatrixXd per_param(n, chains);
    for (int c = 0; c < chains; ++c) per_param.col(c) = all[size_t(c)].col(j);
    const EssResult e = ess_bulk_detailed(per_param);
    CHECK(s.parameters[size_t(j)].ess_raw == e.raw);
    CHECK(s.parameters[size_t(j)].ess == e.capped);
    CHECK(s.parameters[size_t(j)].rhat == split_rhat(per_param));
    if (e.capped < best) {
      best = e.capped;
      argmin = j;
    }
    max_rhat = std::max(max_rhat, split_rhat(per_param));
  }
  CHECK(s.min_ess_index == argmin);
  CHECK(s.min_ess_index == 1);
  CHECK(s.min_ess == best);
  CHECK(s.max_rhat == max_rhat);
  CHECK(s.ess_per_grad == best / 50000.0);
  CHECK(s.ess_per_sec == best / 2.0);

  // Non-positive denominators give undefined ratios.
  const MultiChainSummary zero_cost = summarize_chains(all, 0, 0.0);
  CHECK(std::isnan(zero_cost.ess_per_grad));
  CHECK(std::isnan(zero_cost.ess_per_sec));

  // Shape mismatches are rejected.
  std::vector<Eigen::MatrixXd> bad = all;
  bad[1] = Eigen::MatrixXd::Zero(n, d + 1);
  CHECK_THROWS_AS(summarize_chains(bad, 1, 1.0), std::invalid_argument);
  std::vector<Eigen::MatrixXd> ragged = all;
  ragged[2] = Eigen::MatrixXd::Zero(n - 1, d);
  CHECK_THROWS_AS(summarize_chains(ragged, 1, 1.0), std::invalid_argument);
}

TEST_CASE("a constant parameter is skipped by the aggregates") {
  std::vector<Eigen::MatrixXd> all;
  for (int c = 0; c < 4; ++c) {
    Eigen::MatrixXd m(100, 2);
    m.col(0) = iid_chains(100, 1, 700 + unsigned(c));
    m.col(1).setConstant(3.0);
    all.push_back(std::move(m));
  }
  const MultiChainSummary s = summarize_chains(all, 1000, 1.0);
  CHECK(std::isnan(s.parameters[1].ess));
  CHECK(std::isnan(s.parameters[1].rhat));
  CHECK(s.min_ess_index == 0);
  CHECK(std::isfinite(s.min_ess));
  CHECK(std::isfinite(s.max_rhat));
  CHECK(s.ess_per_grad == s.min_ess / 1000.0);
}
