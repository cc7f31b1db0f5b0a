#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "eapo/penalty.hpp"
#include "eapo/solver.hpp"
#include "oracles.hpp"

using namespace eapo;
using Catch::Approx;

namespace {

struct Instance {
    Vector mu;
    Matrix sigma;
    Vector L;
};

Instance random_instance(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance in;
    in.mu = Vector(n);
    in.L = Vector(n);
    for (int i = 0; i < n; ++i) {
        in.mu[i] = 0.5 + u(rng);
        in.L[i] = 0.2 + u(rng);
    }
    in.sigma = oracle::random_spd(n, rng, 0.5);
    return in;
}

} // namespace

TEST_CASE("objective examples", "[solver]") {
    SolverConfig c;
    c.gamma = 0.0;
    c.theta = 0.0;
    Vector mu(2);
    mu << 0.3, 0.7;
    Vector x(2);
    x << 0.25, 0.75;
    CHECK(objective(x, mu, Matrix::Identity(2, 2), Vector::Ones(2), c) == Approx(x.dot(mu)).epsilon(1e-15));
    c.gamma = 1.0;
    c.theta = 0.5;
    mu << 1.0, 0.0;
    x << 1.0, 0.0;
    CHECK(objective(x, mu, Matrix::Identity(2, 2), Vector::Ones(2), c) == Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("objective matches a term-by-term evaluation", "[solver]") {
    std::mt19937_64 rng(41);
    for (BallNorm p : {BallNorm::l1, BallNorm::l2, BallNorm::linf}) {
        for (int k = 0; k < 30; ++k) {
            const Instance in = random_instance(4, rng);
            const Vector x = oracle::random_simplex(4, rng);
            SolverConfig c;
            c.gamma = 0.8;
            c.theta = 0.3;
            c.p = p;
            c.absorb_lipschitz = false;
            double ret = 0.0, quad = 0.0, pen = 0.0;
            for (int i = 0; i < 4; ++i) {
                ret += x[i] * in.mu[i];
                for (int j = 0; j < 4; ++j) quad += x[i] * in.sigma(i, j) * x[j];
            }
            // q is the conjugate of p
            for (int i = 0; i < 4; ++i) {
                const double v = std::abs(in.L[i] * x[i]);
                if (p == BallNorm::l1) pen = std::max(pen, v);
                else if (p == BallNorm::linf) pen += v;
                else pen += v * v;
            }
            if (p == BallNorm::l2) pen = std::sqrt(pen);
            CHECK(std::abs(objective(x, in.mu, in.sigma, in.L, c) - (ret - 0.8 * pen - 0.3 * quad)) <= 1e-12);
        }
    }
}

TEST_CASE("gradient matches central differences", "[solver]") {
    std::mt19937_64 rng(42);
    for (int k = 0; k < 100; ++k) {
        const int n = 2 + k % 5;
        const Instance in = random_instance(n, rng);
        const Vector x = oracle::random_simplex(n, rng);
        SolverConfig c;
        c.gamma = 0.7;
        c.theta = 0.4;
        const Vector g = gradient(x, in.mu, in.sigma, c);
        const double h = 1e-6;
        for (int i = 0; i < n; ++i) {
            Vector up = x, dn = x;
            up[i] += h;
            dn[i] -= h;
            const double fd = (objective(up, in.mu, in.sigma, in.L, c) - objective(dn, in.mu, in.sigma, in.L, c)) / (2 * h);
            CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max(1.0, std::abs(g[i])));
        }
    }
    SolverConfig c;
    c.gamma = 0.0;
    c.theta = 0.0;
    Vector mu(3);
    mu << 0.1, 0.2, 0.3;
    CHECK(gradient(Vector::Constant(3, 1.0 / 3), mu, Matrix::Identity(3, 3), c) == mu);
    c.gamma = 0.5;
    c.theta = 2.0;
    const Vector g1 = gradient(Vector::Ones(1), Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.3), c);
    CHECK(g1[0] == Approx(1.0 - 0.5 - 2.0 * 2.0 * 0.3).epsilon(1e-15));
}

TEST_CASE("simplex projection", "[solver]") {
    Vector v(3);
    v << 0.2, 0.3, 0.5;
    CHECK((project_simplex(v) - v).cwiseAbs().maxCoeff() <= 1e-15);
    v << 2.0, 0.0, 0.0;
    CHECK(project_simplex(v) == Vector((Vector(3) << 1.0, 0.0, 0.0).finished()));
    std::mt19937_64 rng(43);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int k = 0; k < 500; ++k) {
        const int n = 1 + k % 6;
        Vector w(n);
        for (int i = 0; i < n; ++i) w[i] = g(rng);
        const Vector x = project_simplex(w);
        CHECK(std::abs(x.sum() - 1.0) <= 1e-12);
        CHECK(x.minCoeff() >= 0.0);
        CHECK((x - oracle::simplex_projection_bisection(w)).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("turnover projection", "[solver]") {
    Vector x(3), prev(3);
    x << 0.5, 0.3, 0.2;
    prev << 0.4, 0.4, 0.2;
    CHECK(project_turnover(x, prev, 0.5).weights == x);
    CHECK((project_turnover(x, prev, 0.0).weights - prev).norm() == 0.0);

    std::mt19937_64 rng(44);
    for (int k = 0; k < 20; ++k) {
        const Vector a = oracle::random_simplex(3, rng), b = oracle::random_simplex(3, rng);
        const double tau = 0.5 * (a - b).lpNorm<1>();
        const TurnoverProjection tp = project_turnover(a, b, tau);
        CHECK(tp.converged);
        CHECK((tp.weights - b).lpNorm<1>() <= tau + 1e-8);
        CHECK(std::abs(tp.weights.sum() - 1.0) <= 1e-10);
        // fine-grid search over the feasible set
        double best = std::numeric_limits<double>::infinity();
        const int K = 400;
        for (int i = 0; i <= K; ++i)
            for (int j = 0; i + j <= K; ++j) {
                Vector y(3);
                y << i / double(K), j / double(K), (K - i - j) / double(K);
                if ((y - b).lpNorm<1>() <= tau + 1e-12) best = std::min(best, (y - a).squaredNorm());
            }
        CHECK((tp.weights - a).squaredNorm() <= best + 1e-6);
    }
}

TEST_CASE("solver examples", "[solver]") {
    SolverConfig c;
    c.gamma = 0.0;
    c.theta = 50.0;
    const SolveResult ew = solve_robust_mv(Vector::Zero(4), Matrix::Identity(4, 4), Vector::Ones(4), c,
                                           (Vector(4) << 0.7, 0.1, 0.1, 0.1).finished());
    CHECK((ew.weights - Vector::Constant(4, 0.25)).cwiseAbs().maxCoeff() <= 1e-7);

    c.theta = 0.0;
    Vector mu(3);
    mu << 1.0, 0.0, 0.0;
    const SolveResult lp = solve_robust_mv(mu, Matrix::Identity(3, 3), Vector::Ones(3), c);
    CHECK(lp.weights[0] == Approx(1.0).margin(1e-12));

    std::mt19937_64 rng(45);
    const Instance in = random_instance(3, rng);
    c.gamma = 0.3;
    c.theta = 0.5;
    const SolveResult r = solve_robust_mv(in.mu, in.sigma, in.L, c);
    const auto ref = oracle::simplex_max([&](const oracle::Vec& x) { return objective(x, in.mu, in.sigma, in.L, c); }, 3);
    CHECK(std::abs(r.diagnostics.objective_value - ref.second) <= 1e-6);
    CHECK_THROWS_AS(solve_robust_mv(in.mu, in.sigma, in.L, c, Vector::Constant(3, 0.5)), InvalidInput);
}

TEST_CASE("solver iterates stay feasible and improve", "[solver]") {
    std::mt19937_64 rng(46);
    for (int k = 0; k < 10; ++k) {
        const Instance in = random_instance(6, rng);
        SolverConfig c;
        c.gamma = 0.5;
        c.theta = 1.0;
        c.record_trace = true;
        const SolveResult r = solve_robust_mv(in.mu, in.sigma, in.L, c);
        CHECK(r.weights.minCoeff() >= -1e-12);
        CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-10);
        const auto& tr = r.diagnostics.objective_trace;
        for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] >= tr[i - 1]);
    }
}

TEST_CASE("solver matches the oracle for every ball norm", "[solver]") {
    std::mt19937_64 rng(47);
    for (BallNorm p : {BallNorm::l1, BallNorm::l2, BallNorm::linf}) {
        for (int k = 0; k < 6; ++k) {
            const int n = 2 + k % 3;
            const Instance in = random_instance(n, rng);
            SolverConfig c;
            c.gamma = 0.4;
            c.theta = 0.5;
            c.p = p;
            c.absorb_lipschitz = false;
            const SolveResult r = solve_robust_mv(in.mu, in.sigma, in.L, c);
            const OracleResult o = brute_force_oracle(in.mu, in.sigma, in.L, c, 0.05);
            CHECK(r.diagnostics.objective_value >= o.value - 1e-6);
        }
    }
}

TEST_CASE("oracle refuses large problems and handles trivial cases", "[solver]") {
    SolverConfig c;
    CHECK_THROWS_AS(brute_force_oracle(Vector::Zero(5), Matrix::Identity(5, 5), Vector::Ones(5), c, 0.1), ConfigError);
    c.gamma = 0.0;
    c.theta = 0.0;
    Vector mu(3);
    mu << 0.1, 0.9, 0.4;
    const OracleResult o = brute_force_oracle(mu, Matrix::Identity(3, 3), Vector::Ones(3), c, 0.1);
    CHECK(o.weights[1] == Approx(1.0));
    c.theta = 1.0;
    const OracleResult s = brute_force_oracle(Vector::Zero(3), Matrix::Identity(3, 3), Vector::Ones(3), c, 0.1);
    CHECK((s.weights - Vector::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() <= 1e-8);
    // grid refinement changes the value by less than step^2 scale
    std::mt19937_64 rng(48);
    const Instance in = random_instance(3, rng);
    c.gamma = 0.3;
    const double a = brute_force_oracle(in.mu, in.sigma, in.L, c, 0.1).value;
    const double b = brute_force_oracle(in.mu, in.sigma, in.L, c, 0.025).value;
    CHECK(std::abs(a - b) <= 0.01);
}

TEST_CASE("value function monotone in gamma and m", "[solver]") {
    std::mt19937_64 rng(49);
    std::normal_distribution<double> g(1.0005, 0.01);
    Matrix W(200, 5);
    for (Index t = 0; t < 200; ++t)
        for (Index i = 0; i < 5; ++i) W(t, i) = g(rng);
    Vector lam(5);
    lam << 1.0, 3.0, 0.2, 5.0, 2.0;
    const IntensityVector iv(lam);
    const Matrix S = oracle::random_spd(5, rng, 1e-3);
    double prev_m = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= 10; ++m) {
        PenaltyParams pp;
        pp.m = m;
        const Vector mu = emissions_adjusted_mean(W, iv, pp);
        SolverConfig c;
        c.gamma = 0.2;
        const double v = optimal_value(mu, S, Vector::Ones(5), c);
        CHECK(v <= prev_m + 1e-9);
        prev_m = v;
    }
    PenaltyParams pp;
    pp.m = 3;
    const Vector mu = emissions_adjusted_mean(W, iv, pp);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
        SolverConfig c;
        c.gamma = 0.1 * k;
        const double v = optimal_value(mu, S, Vector::Ones(5), c);
        CHECK(v <= prev + 1e-9);
        prev = v;
    }
}

TEST_CASE("shadow price examples", "[solver]") {
    std::mt19937_64 rng(50);
    // pinned vertex: one asset dominates
    Vector mu(3);
    mu << 5.0, 0.1, 0.1;
    Vector L(3);
    L << 0.3, 0.5, 0.7;
    SolverConfig c;
    c.gamma = 1.0;
    c.theta = 0.01;
    c.absorb_lipschitz = false;
    const double pi = shadow_price(mu, Matrix::Identity(3, 3), L, c, 1e-3);
    CHECK(pi == Approx(0.3).epsilon(1e-6));

    // Gamma near 0 with an interior optimum
    const Instance in = random_instance(4, rng);
    c.gamma = 1e-4;
    c.theta = 2.0;
    c.tol = 1e-12;
    SolverConfig c0 = c;
    c0.gamma = 0.0;
    const Vector x0 = solve_robust_mv(in.mu, in.sigma, in.L, c0).weights;
    CHECK(shadow_price(in.mu, in.sigma, in.L, c, 1e-4) ==
          Approx(in.L.cwiseProduct(x0).norm()).epsilon(1e-3));

    // theta dominating: equal-weight limit
    c.theta = 1e5;
    c.gamma = 0.01;
    const double lim = (in.L / 4.0).norm();
    CHECK(shadow_price(in.mu, Matrix::Identity(4, 4), in.L, c, 1e-3) == Approx(lim).epsilon(1e-3));
}

TEST_CASE("warm start saves iterations on a drifting sequence", "[solver]") {
    std::vector<double> ratios;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(600 + seed);
        std::normal_distribution<double> g(0.0, 1.0);
        const int n = 20;
        Instance in = random_instance(n, rng);
        in.mu *= 0.02;
        in.sigma *= 0.002;
        SolverConfig c;
        c.gamma = 0.02;
        c.theta = 0.5;
        Vector prev = solve_robust_mv(in.mu, in.sigma, in.L, c).weights;
        long cold = 0, warm = 0;
        for (int step = 0; step < 10; ++step) {
            for (int i = 0; i < n; ++i) in.mu[i] += 1e-5 * g(rng);
            cold += solve_robust_mv(in.mu, in.sigma, in.L, c).diagnostics.iterations;
            const SolveResult w = solve_robust_mv(in.mu, in.sigma, in.L, c, prev);
            warm += w.diagnostics.iterations;
            prev = w.weights;
        }
        ratios.push_back(static_cast<double>(warm) / static_cast<double>(cold));
    }
    std::sort(ratios.begin(), ratios.end());
    CHECK(0.5 * (ratios[9] + ratios[10]) <= 0.2);
}

TEST_CASE("solver config validation", "[solver]") {
    SolverConfig c;
    c.gamma = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.turnover_cap = 2.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.m = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("turnover cap binds after the gradient loop", "[solver]") {
    Vector mu(3);
    mu << 1.0, 0.0, 0.0;
    SolverConfig c;
    c.gamma = 0.0;
    c.theta = 0.0;
    c.turnover_cap = 0.2;
    const Vector start = Vector::Constant(3, 1.0 / 3);
    const SolveResult r = solve_robust_mv(mu, Matrix::Identity(3, 3), Vector::Ones(3), c, start);
    CHECK(r.diagnostics.turnover_binding);
    CHECK((r.weights - start).lpNorm<1>() <= 0.2 + 1e-8);
    CHECK(r.weights[0] == Approx(1.0 / 3 + 0.1).margin(1e-6));
}
