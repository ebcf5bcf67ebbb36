#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "storagedp/backend.hpp"

using namespace storagedp;

namespace {

StorageParams asset(double pcap, double scap, double eta) {
    StorageParams p;
    p.power_cap = pcap;
    p.energy_cap = scap;
    p.efficiency = eta;
    return p;
}

Matrix<double> random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -10, double hi = 10) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix<double> m(r, c);
    for (auto& x : m.flat()) x = u(rng);
    return m;
}

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> p(n);
    double sum = 0;
    for (auto& x : p) sum += (x = u(rng));
    for (auto& x : p) x /= sum;
    return p;
}

// Brute-force triple loop over the explicit S x P x R tensor.
Matrix<double> triple_loop_max(const Matrix<double>& next, const Matrix<double>& payoff) {
    const std::size_t S = next.rows(), P = next.cols(), R = payoff.cols();
    std::vector<double> tensor(S * P * R);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < P; ++j)
            for (std::size_t r = 0; r < R; ++r) tensor[(i * P + j) * R + r] = payoff(j, r) + next(i, j);
    Matrix<double> out(S, R, kNegInf);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t j = 0; j < P; ++j) out(i, r) = std::max(out(i, r), tensor[(i * P + j) * R + r]);
    return out;
}

class Kernels : public ::testing::TestWithParam<std::string> {
protected:
    std::unique_ptr<KernelSet> k = make_backend(GetParam(), 4);
};

}  // namespace

TEST_P(Kernels, GatherOfLinearFunctionIsClampedLevel) {
    const auto grid = make_grid(asset(1.0, 2.0, 0.8), 0.25);
    const auto tt = build_transition_tables(grid);
    const auto out = gather_interpolate(*k, grid.states, tt);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            EXPECT_NEAR(out(i, j), std::clamp(tt.next_level(i, j), 0.0, 2.0), 1e-12);
}

TEST_P(Kernels, GatherOfZerosIsZero) {
    const auto grid = make_grid(asset(1.0, 2.0, 0.8), 0.25);
    const auto tt = build_transition_tables(grid);
    const auto out = gather_interpolate(*k, std::vector<double>(grid.num_states(), 0.0), tt);
    for (double x : out.flat()) EXPECT_EQ(x, 0.0);
}

TEST_P(Kernels, GatherHandExample) {
    const auto tt = build_transition_tables(make_grid(asset(1, 1, 1), 0.5));
    const auto out = gather_interpolate(*k, std::vector<double>{0, 1, 4}, tt);
    const std::vector<double> expect{4, 1, 0, 0, 0};
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(out(0, j), expect[j]);
}

TEST_P(Kernels, GatherRejectsWrongLength) {
    const auto tt = build_transition_tables(make_grid(asset(1, 1, 1), 0.5));
    Matrix<double> out;
    EXPECT_THROW(k->gather_interpolate(std::vector<double>{0, 1}, tt, out), ConfigError);
}

TEST_P(Kernels, MaskAssign) {
    std::mt19937_64 rng(1);
    const auto m = random_matrix(rng, 3, 4);
    auto a = m;
    k->mask_assign(a, Matrix<std::uint8_t>(3, 4, 0), kNegInf);
    EXPECT_EQ(a, m);
    k->mask_assign(a, Matrix<std::uint8_t>(3, 4, 1), kNegInf);
    for (double x : a.flat()) EXPECT_EQ(x, kNegInf);
    Matrix<double> wrong(2, 4);
    EXPECT_THROW(k->mask_assign(wrong, Matrix<std::uint8_t>(3, 4, 0), kNegInf), ConfigError);
}

TEST_P(Kernels, MaskAssignGridExampleMasksLastTwoColumnsOfEmptyState) {
    const auto tt = build_transition_tables(make_grid(asset(1, 1, 1), 0.5));
    auto m = gather_interpolate(*k, std::vector<double>{0, 1, 4}, tt);
    k->mask_assign(m, tt.infeasible, kNegInf);
    EXPECT_EQ(m(0, 2), 0.0);
    EXPECT_EQ(m(0, 3), kNegInf);
    EXPECT_EQ(m(0, 4), kNegInf);
}

TEST_P(Kernels, OuterPayoff) {
    auto z = outer_payoff(*k, std::vector<double>{-1, 0, 2}, std::vector<double>{0});
    for (double x : z.flat()) EXPECT_EQ(x, 0.0);
    auto one = outer_payoff(*k, std::vector<double>{1}, std::vector<double>{7, -2});
    EXPECT_EQ(one(0, 0), 7.0);
    EXPECT_EQ(one(0, 1), -2.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-5, 5);
    std::vector<double> a(3), p(3);
    for (auto& x : a) x = u(rng);
    for (auto& x : p) x = u(rng);
    const auto m = outer_payoff(*k, a, p);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(m(j, r), a[j] * p[r]);
}

TEST_P(Kernels, MaxWithZeroPayoffIsRowMax) {
    std::mt19937_64 rng(2);
    const auto next = random_matrix(rng, 4, 5);
    const auto out = broadcast_payoff_max(*k, next, Matrix<double>(5, 2, 0.0));
    for (std::size_t i = 0; i < 4; ++i) {
        const auto row = next.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        EXPECT_EQ(out(i, 0), m);
        EXPECT_EQ(out(i, 1), m);
    }
}

TEST_P(Kernels, MaxTinyExample) {
    Matrix<double> next(1, 2);
    next(0, 0) = 0;
    next(0, 1) = 5;
    Matrix<double> pay(2, 1);
    pay(0, 0) = 3;
    pay(1, 0) = 1;
    EXPECT_EQ(broadcast_payoff_max(*k, next, pay)(0, 0), 6.0);
}

TEST_P(Kernels, MaxMatchesTripleLoopOnRandomInstances) {
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        auto next = random_matrix(rng, 4, 5);
        next(seed % 4, seed % 5) = kNegInf;
        const auto pay = random_matrix(rng, 5, 3);
        EXPECT_EQ(broadcast_payoff_max(*k, next, pay), triple_loop_max(next, pay));
    }
}

TEST_P(Kernels, ArgmaxTiesGoToSmallestIndex) {
    Matrix<double> next(1, 3, 1.0);
    Matrix<double> pay(3, 1, 0.0);
    Matrix<ActionIndex> arg;
    broadcast_payoff_max(*k, next, pay, &arg);
    EXPECT_EQ(arg(0, 0), 0);
    next(0, 0) = kNegInf;
    broadcast_payoff_max(*k, next, pay, &arg);
    EXPECT_EQ(arg(0, 0), 1);
}

TEST_P(Kernels, AllInfeasibleRowIsInvariantError) {
    Matrix<double> next(2, 2, kNegInf);
    next(0, 0) = 1.0;
    EXPECT_THROW(broadcast_payoff_max(*k, next, Matrix<double>(2, 1, 0.0)), InvariantError);
}

TEST_P(Kernels, Expectation) {
    std::mt19937_64 rng(9);
    const auto q = random_matrix(rng, 3, 4);
    const auto col = expectation(*k, random_matrix(rng, 3, 1), std::vector<double>{1.0});
    EXPECT_EQ(col.size(), 3u);
    const auto means = expectation(*k, q, std::vector<double>(4, 0.25));
    for (std::size_t i = 0; i < 3; ++i) {
        double m = 0;
        for (std::size_t r = 0; r < 4; ++r) m += q(i, r);
        EXPECT_NEAR(means[i], m / 4, 1e-12);
    }
    const auto probs = random_probs(rng, 4);
    const auto v = expectation(*k, q, probs);
    for (std::size_t i = 0; i < 3; ++i) {
        double acc = 0;
        for (std::size_t r = 0; r < 4; ++r) acc += q(i, r) * probs[r];
        EXPECT_NEAR(v[i], acc, 1e-12);
    }
}

TEST_P(Kernels, ExpectationRejectsNonSimplex) {
    Matrix<double> q(2, 2, 1.0);
    EXPECT_THROW(expectation(*k, q, std::vector<double>{0.5, 0.6}), ConfigError);
    EXPECT_THROW(expectation(*k, q, std::vector<double>{1.5, -0.5}), ConfigError);
}

INSTANTIATE_TEST_SUITE_P(Backends, Kernels, ::testing::Values("reference", "parallel"));

TEST(BackendEquivalence, RandomInputsAcross100Seeds) {
    ReferenceKernels ref;
    ParallelKernels par(4);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t S = 2 + rng() % 60, P = 1 + rng() % 30, R = 1 + rng() % 40;
        auto next = random_matrix(rng, S, P);
        Matrix<std::uint8_t> mask(S, P);
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 1; j < P; ++j) mask(i, j) = (rng() % 3) == 0;
        ref.mask_assign(next, mask, kNegInf);
        std::vector<double> actions(P), prices(R);
        for (auto& x : actions) x = std::uniform_real_distribution<double>(-2, 2)(rng);
        for (auto& x : prices) x = std::uniform_real_distribution<double>(-50, 200)(rng);
        const auto probs = random_probs(rng, R);

        Matrix<ActionIndex> arg_ref, arg_par;
        const auto pay_ref = outer_payoff(ref, actions, prices);
        const auto pay_par = outer_payoff(par, actions, prices);
        ASSERT_EQ(pay_ref, pay_par);
        const auto q_ref = broadcast_payoff_max(ref, next, pay_ref, &arg_ref);
        const auto q_par = broadcast_payoff_max(par, next, pay_par, &arg_par);
        const auto v_ref = expectation(ref, q_ref, probs);
        const auto v_par = expectation(par, q_par, probs);
        for (std::size_t n = 0; n < q_ref.size(); ++n) ASSERT_LE(rel(q_ref.flat()[n], q_par.flat()[n]), 1e-12);
        for (std::size_t i = 0; i < S; ++i) ASSERT_LE(rel(v_ref[i], v_par[i]), 1e-12);
        EXPECT_EQ(arg_ref, arg_par);
    }
}

TEST(BackendPurity, RepeatedCallsAreBitIdentical) {
    std::mt19937_64 rng(77);
    const auto next = random_matrix(rng, 50, 20);
    const auto pay = random_matrix(rng, 20, 30);
    for (const char* name : {"reference", "parallel"}) {
        const auto k = make_backend(name);
        EXPECT_EQ(broadcast_payoff_max(*k, next, pay), broadcast_payoff_max(*k, next, pay)) << name;
    }
}

TEST(BackendFactory, UnknownNameIsConfigError) { EXPECT_THROW(make_backend("gpu"), ConfigError); }
