#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "eapo/inference.hpp"
#include "oracles.hpp"

using namespace eapo;
using Catch::Approx;

namespace {

Vector ar1(Index T, double phi, std::uint64_t seed, double mean = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector d(T);
    double prev = 0.0;
    for (Index t = 0; t < T; ++t) {
        prev = phi * prev + g(rng);
        d[t] = mean + prev;
    }
    return d;
}

} // namespace

TEST_CASE("newey-west matches literal loops", "[inference]") {
    for (std::uint64_t seed : {1, 2, 3}) {
        for (int L : {0, 1, 5, 20}) {
            const Vector d = ar1(50 + 30 * static_cast<Index>(seed), 0.6, seed);
            const HacResult h = newey_west(d, L);
            const double ref = oracle::newey_west_lrv(std::vector<double>(d.data(), d.data() + d.size()), L);
            CHECK(std::abs(h.long_run_variance - ref) <= 1e-14 * std::max(1.0, std::abs(ref)));
            CHECK(h.standard_error == Approx(std::sqrt(ref / static_cast<double>(d.size()))).epsilon(1e-14));
            CHECK(h.t_stat == Approx(d.mean() / h.standard_error).epsilon(1e-14));
        }
    }
}

TEST_CASE("newey-west special cases", "[inference]") {
    Vector d(4);
    d << 1.0, -1.0, 1.0, -1.0;
    const HacResult iid = newey_west(d, 0);
    CHECK(iid.long_run_variance == Approx(1.0).epsilon(1e-15));
    CHECK(iid.t_stat == 0.0);

    const HacResult c = newey_west(Vector::Constant(30, 0.25), 5);
    CHECK(c.long_run_variance == 0.0);
    CHECK(std::isnan(c.t_stat));
    const HacResult z = newey_west(Vector::Zero(30), 5);
    CHECK(z.t_stat == 0.0);

    CHECK_THROWS_AS(newey_west(Vector::Zero(5), 5), InvalidInput);
    CHECK_THROWS_AS(newey_west(Vector::Zero(5), -1), InvalidInput);

    // strongly alternating series: truncated kernel sum goes negative
    Vector alt(6);
    alt << 1.0, -1.0, 1.0, -1.0, 1.0, -1.0;
    const HacResult f = newey_west(alt, 1);
    CHECK(f.long_run_variance >= 0.0);
}

TEST_CASE("newey-west invariances", "[inference]") {
    const Vector d = ar1(200, 0.3, 9, 0.1);
    const HacResult base = newey_west(d, 10);
    const HacResult scaled = newey_west(3.0 * d, 10);
    CHECK(scaled.t_stat == Approx(base.t_stat).epsilon(1e-12));
    CHECK(scaled.long_run_variance == Approx(9.0 * base.long_run_variance).epsilon(1e-12));
    const HacResult neg = newey_west(-d, 10);
    CHECK(neg.t_stat == Approx(-base.t_stat).epsilon(1e-12));
    const HacResult shifted = newey_west((d.array() + 5.0).matrix(), 10);
    CHECK(shifted.long_run_variance == Approx(base.long_run_variance).epsilon(1e-9));
}

TEST_CASE("pairwise tests are antisymmetric", "[inference]") {
    std::vector<Vector> r = {ar1(120, 0.1, 11), ar1(120, 0.2, 12), ar1(120, 0.0, 13)};
    const auto tab = pairwise_return_tests(r, 5);
    for (std::size_t a = 0; a < 3; ++a) {
        CHECK(tab[a][a].t_stat == 0.0);
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(tab[a][b].t_stat == Approx(-tab[b][a].t_stat).epsilon(1e-12));
            CHECK(tab[a][b].long_run_variance == Approx(tab[b][a].long_run_variance).epsilon(1e-12));
        }
    }
    r.push_back(Vector::Zero(5));
    CHECK_THROWS_AS(pairwise_return_tests(r), ShapeError);
}

TEST_CASE("sharpe ratio and quantiles", "[inference]") {
    Vector r(3);
    r << 0.01, 0.02, 0.03;
    CHECK(sharpe_ratio(r, 1.0) == Approx(2.0).epsilon(1e-14));
    CHECK(std::isnan(sharpe_ratio(Vector::Constant(4, 0.01))));
    CHECK(quantile_type7({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
    CHECK(quantile_type7({4.0, 1.0, 3.0, 2.0}, 0.0) == 1.0);
    CHECK(quantile_type7({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
    CHECK(quantile_type7({0.0, 10.0}, 0.025) == Approx(0.25).epsilon(1e-15));
}

TEST_CASE("block bootstrap", "[inference]") {
    const Vector a = ar1(500, 0.1, 21, 0.05);
    const BootstrapResult same = block_bootstrap_sharpe(a, a, 20, 200, 3);
    CHECK(same.diff == 0.0);
    CHECK(same.ci_low == 0.0);
    CHECK(same.ci_high == 0.0);

    const Vector b = ar1(500, 0.1, 22, 0.0);
    const BootstrapResult one = block_bootstrap_sharpe(a, b, 20, 1, 3);
    CHECK(one.ci_low == one.ci_high);
    CHECK(one.replicates.size() == 1);

    const BootstrapResult r1 = block_bootstrap_sharpe(a, b, 20, 300, 17);
    const BootstrapResult r2 = block_bootstrap_sharpe(a, b, 20, 300, 17);
    CHECK(r1.replicates == r2.replicates);
    CHECK(r1.ci_low <= r1.ci_high);
    CHECK(r1.diff == Approx(sharpe_ratio(a) - sharpe_ratio(b)).epsilon(1e-14));
    // replication r only depends on seed + r
    const BootstrapResult shifted = block_bootstrap_sharpe(a, b, 20, 299, 18);
    for (std::size_t i = 0; i < 299; ++i) CHECK(shifted.replicates[i] == r1.replicates[i + 1]);

    // block length 1 and T: a single full-length circular block is a rotation
    const BootstrapResult full = block_bootstrap_sharpe(a, b, 500, 50, 4);
    for (double v : full.replicates) CHECK(v == Approx(full.diff).margin(1e-12));

    CHECK_THROWS_AS(block_bootstrap_sharpe(a, b.head(10), 20, 10, 1), ShapeError);
    CHECK_THROWS_AS(block_bootstrap_sharpe(a.head(5), b.head(5), 20, 10, 1), InsufficientData);
    CHECK_THROWS_AS(block_bootstrap_sharpe(a, b, 0, 10, 1), InvalidInput);
}
