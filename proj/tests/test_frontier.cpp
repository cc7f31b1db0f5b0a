#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "eapo/frontier.hpp"
#include "oracles.hpp"

using namespace eapo;
using Catch::Approx;

namespace {

/// Flat max-min over whole control sequences and disturbance sequences,
/// discounted sum accumulated in the same nesting as the recursion.
double flat_enumeration(const TinyDynamicSpec& spec) {
    const std::vector<Vector> grid = tiny_grid(spec);
    const int P = spec.horizon + 1;
    std::vector<std::size_t> ctrl(static_cast<std::size_t>(P), 0);
    double best = -std::numeric_limits<double>::infinity();
    for (;;) {
        // worst case over disturbance sequences for this control sequence
        std::vector<std::size_t> zi(static_cast<std::size_t>(P), 0);
        double worst = std::numeric_limits<double>::infinity();
        for (;;) {
            double acc = 0.0;
            for (int t = P - 1; t >= 0; --t) {
                const auto s = static_cast<std::size_t>(t);
                const double stage = tiny_stage_payoff(spec, t, grid[ctrl[s]], spec.z_sets[s][zi[s]]);
                acc = t == P - 1 ? stage : stage + spec.beta * acc;
            }
            worst = std::min(worst, acc);
            int t = 0;
            while (t < P && ++zi[static_cast<std::size_t>(t)] == spec.z_sets[static_cast<std::size_t>(t)].size())
                zi[static_cast<std::size_t>(t++)] = 0;
            if (t == P) break;
        }
        best = std::max(best, worst);
        int t = 0;
        while (t < P && ++ctrl[static_cast<std::size_t>(t)] == grid.size()) ctrl[static_cast<std::size_t>(t++)] = 0;
        if (t == P) break;
    }
    return best;
}

TinyDynamicSpec random_spec(std::mt19937_64& rng, int horizon, Index n, int nz) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TinyDynamicSpec s;
    s.horizon = horizon;
    s.n = n;
    s.beta = 0.9;
    s.grid_step = 0.1;
    for (int t = 0; t <= horizon; ++t) {
        Vector g(n);
        Matrix d(n, 2);
        for (Index i = 0; i < n; ++i) {
            g[i] = 1.0 + 0.1 * u(rng);
            d(i, 0) = 0.1 * u(rng);
            d(i, 1) = 0.1 * u(rng);
        }
        std::vector<Vector> zs;
        for (int k = 0; k < nz; ++k) zs.push_back((Vector(2) << u(rng), u(rng)).finished());
        s.gammas.push_back(g);
        s.deltas.push_back(d);
        s.z_sets.push_back(zs);
    }
    return s;
}

} // namespace

TEST_CASE("pareto sweep examples", "[frontier]") {
    Vector r(3), lam(3);
    r << 0.5, 0.9, 0.9;
    lam << 0.1, 2.0, 1.0;
    const auto pts = pareto_sweep(r, IntensityVector(lam), (Vector(2) << 0.0, 1e6).finished());
    CHECK(pts[0].weights[1] == 1.0); // tie on r broken by the lowest index
    CHECK(pts[1].weights[0] == 1.0);

    Vector r2(2), l2(2);
    r2 << 1.0, 0.9;
    l2 << 2.0, 1.0;
    const auto cross = pareto_sweep(r2, IntensityVector(l2), (Vector(3) << 0.09, 0.1, 0.11).finished());
    CHECK(cross[0].weights[0] == 1.0);
    CHECK(cross[1].weights[0] == 1.0); // exact tie at the crossover
    CHECK(cross[2].weights[1] == 1.0);
    for (const auto& p : cross) CHECK(std::abs(p.value - (p.mean_return - p.mu_weight * p.intensity)) <= 1e-12);
    CHECK_THROWS_AS(pareto_sweep(r2, IntensityVector(l2), Vector(0)), InvalidInput);
}

TEST_CASE("frontier diagnostics", "[frontier]") {
    const auto flat = pareto_sweep(Vector::Constant(1, 0.7), IntensityVector(Vector::Constant(1, 2.0)),
                                   Vector::LinSpaced(11, 0.0, 1.0));
    const FrontierReport fr = frontier_diagnostics(flat);
    CHECK(fr.ok());
    for (std::size_t i = 1; i < flat.size(); ++i)
        CHECK((flat[i].value - flat[i - 1].value) / (flat[i].mu_weight - flat[i - 1].mu_weight) == Approx(-2.0).epsilon(1e-12));

    Vector r2(2), l2(2);
    r2 << 1.0, 0.9;
    l2 << 2.0, 1.0;
    const auto two = pareto_sweep(r2, IntensityVector(l2), Vector::LinSpaced(41, 0.0, 0.2));
    const FrontierReport t = frontier_diagnostics(two);
    CHECK(t.ok());
    CHECK(t.slopes_checked > 30);
}

TEST_CASE("sweep value is the upper envelope of the affine pieces", "[frontier]") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 50;
    Vector r(n), lam(n);
    for (int i = 0; i < n; ++i) {
        r[i] = u(rng);
        lam[i] = 10.0 * u(rng);
    }
    const Vector grid = Vector::LinSpaced(200, 0.0, 1.0);
    const auto pts = pareto_sweep(r, IntensityVector(lam), grid);
    for (const auto& p : pts) {
        double env = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) env = std::max(env, r[i] - p.mu_weight * lam[i]);
        CHECK(p.value == env);
    }
    // unit coherence: lambda scaled by b, mu by 1/b
    const double b = 7.5;
    const auto scaled = pareto_sweep(r, IntensityVector(b * lam), grid / b);
    for (std::size_t k = 0; k < pts.size(); ++k) CHECK(scaled[k].weights == pts[k].weights);
    CHECK(frontier_diagnostics(pts).ok());
}

TEST_CASE("vertex sweep matches the grid oracle", "[frontier]") {
    std::mt19937_64 rng(72);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        Vector r(4), lam(4);
        for (int i = 0; i < 4; ++i) {
            r[i] = u(rng);
            lam[i] = u(rng);
        }
        const double mu = 0.5 * u(rng);
        const auto p = pareto_sweep(r, IntensityVector(lam), Vector::Constant(1, mu))[0];
        const OracleResult o = grid_search_simplex([&](const Vector& x) { return x.dot(r) - mu * x.dot(lam); }, 4, 0.05, false);
        CHECK(o.value == p.value);
    }
}

TEST_CASE("value curve in gamma", "[frontier]") {
    std::mt19937_64 rng(73);
    const Matrix S = oracle::random_spd(4, rng, 0.1);
    const Vector mu = (Vector(4) << 1.0, 1.1, 0.9, 1.05).finished();
    const Vector L = (Vector(4) << 0.5, 0.8, 0.2, 0.6).finished();
    SolverConfig c;
    c.absorb_lipschitz = false;
    const Vector grid = Vector::LinSpaced(10, 0.0, 2.0);
    const Vector v = value_curve_gamma(mu, S, L, c, grid);
    SolverConfig c0 = c;
    c0.gamma = 0.0;
    CHECK(v[0] == optimal_value(mu, S, L, c0));
    for (Index k = 1; k < v.size(); ++k) CHECK(v[k] <= v[k - 1] + 1e-12);
    for (Index a = 0; a < v.size(); ++a)
        for (Index b = a + 1; b < v.size(); ++b)
            CHECK(std::abs(v[b] - v[a]) <= L.maxCoeff() * (grid[b] - grid[a]) + 1e-6);
}

TEST_CASE("regularized sweep trades return for intensity", "[frontier]") {
    std::mt19937_64 rng(74);
    const Matrix S = oracle::random_spd(5, rng, 0.01);
    const Vector r = (Vector(5) << 1.0, 1.02, 0.98, 1.01, 0.99).finished();
    const Vector lam = (Vector(5) << 3.0, 5.0, 0.5, 2.0, 1.0).finished();
    SolverConfig c;
    c.gamma = 0.01;
    const auto pts = pareto_sweep_regularized(r, r, S, Vector::Ones(5), IntensityVector(lam), c,
                                              Vector::LinSpaced(20, 0.0, 0.05));
    for (std::size_t k = 1; k < pts.size(); ++k) CHECK(pts[k].intensity <= pts[k - 1].intensity + 1e-6);
}

TEST_CASE("tiny bellman examples", "[frontier]") {
    std::mt19937_64 rng(75);
    TinyDynamicSpec one = random_spec(rng, 0, 2, 3);
    // single period: max over grid of min over z
    double best = -std::numeric_limits<double>::infinity();
    for (const Vector& x : tiny_grid(one)) {
        double w = std::numeric_limits<double>::infinity();
        for (const Vector& z : one.z_sets[0]) w = std::min(w, tiny_stage_payoff(one, 0, x, z));
        best = std::max(best, w);
    }
    CHECK(bellman_tiny(one) == best);

    TinyDynamicSpec two = random_spec(rng, 2, 2, 2);
    two.beta = 0.0;
    TinyDynamicSpec first = two;
    first.horizon = 0;
    first.gammas.resize(1);
    first.deltas.resize(1);
    first.z_sets.resize(1);
    CHECK(bellman_tiny(two) == bellman_tiny(first));

    TinyDynamicSpec bad = one;
    bad.grid_step = 0.3;
    CHECK_THROWS_AS(bellman_tiny(bad), ConfigError);
    TinyDynamicSpec fine = random_spec(rng, 0, 3, 1);
    fine.grid_step = 0.05;
    CHECK_NOTHROW(bellman_tiny(fine));
}

TEST_CASE("tiny bellman equals flat enumeration", "[frontier]") {
    std::mt19937_64 rng(76);
    for (int k = 0; k < 10; ++k) {
        const TinyDynamicSpec s = random_spec(rng, k % 3, 1 + k % 2, 1 + k % 3);
        CHECK(bellman_tiny(s) == flat_enumeration(s));
    }
}
