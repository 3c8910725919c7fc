#include <doctest.h>

#include <random>

#include "veritas/completion.hpp"
#include "veritas/dataset.hpp"
#include "veritas/errors.hpp"
#include "veritas/reliability.hpp"

using namespace veritas;
using doctest::Approx;
using Eigen::MatrixXd;

namespace {

const std::string kData = VERITAS_TEST_DATA;

MfConfig no_reg(int k) {
    MfConfig c;
    c.k = k;
    c.lambda1 = c.lambda2 = 0.0;
    return c;
}

MatrixXd uniform(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

double central_difference(const MatrixXd& q, const MatrixXd& mask, FactorModel<double> m, const MfConfig& cfg,
                           bool user_block, Eigen::Index r, Eigen::Index c) {
    const double h = 1e-6;
    MatrixXd& x = user_block ? m.user_factors : m.category_factors;
    const double x0 = x(r, c);
    x(r, c) = x0 + h;
    const double up = mf_objective(q, mask, m, cfg);
    x(r, c) = x0 - h;
    const double down = mf_objective(q, mask, m, cfg);
    return (up - down) / (2.0 * h);
}

ReliabilityProfile profile_from(const MatrixXd& values, const MatrixXd& mask) {
    std::vector<std::string> users, cats;
    for (Eigen::Index i = 0; i < values.rows(); ++i) users.push_back("u" + std::to_string(i));
    for (Eigen::Index c = 0; c < values.cols(); ++c) cats.push_back("c" + std::to_string(c));
    ReliabilityProfile p(users, cats);
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index c = 0; c < values.cols(); ++c)
            if (mask(i, c) > 0.0) p.set(i, c, values(i, c), Provenance::Estimated);
    return p;
}

} // namespace

TEST_CASE("objective examples") {
    SUBCASE("perfect fit") {
        FactorModel<double> m;
        m.user_factors = (MatrixXd(2, 1) << 1.0, 2.0).finished();
        m.category_factors = (MatrixXd(3, 1) << 0.5, 1.0, 1.5).finished();
        const MatrixXd q = m.predict();
        CHECK(mf_objective(q, MatrixXd::Ones(2, 3), m, no_reg(1)) == 0.0);
    }
    SUBCASE("one entry, zero prediction") {
        FactorModel<double> m;
        m.user_factors = MatrixXd::Zero(1, 1);
        m.category_factors = MatrixXd::Zero(1, 1);
        CHECK(mf_objective(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), m, no_reg(1)) == 0.5);
        MfConfig reg = no_reg(1);
        reg.lambda1 = reg.lambda2 = 2.0;
        CHECK(mf_objective(MatrixXd::Constant(1, 1, 2.0), MatrixXd::Ones(1, 1), m, reg) == 2.0);
    }
    SUBCASE("masked entries do not count") {
        FactorModel<double> m;
        m.user_factors = MatrixXd::Zero(1, 2);
        m.category_factors = MatrixXd::Zero(2, 2);
        const MatrixXd q = (MatrixXd(1, 2) << 1.0, 100.0).finished();
        const MatrixXd mask = (MatrixXd(1, 2) << 1.0, 0.0).finished();
        CHECK(mf_objective(q, mask, m, no_reg(2)) == 0.5);
    }
    SUBCASE("shape mismatch") {
        FactorModel<double> m;
        m.user_factors = MatrixXd::Zero(2, 1);
        m.category_factors = MatrixXd::Zero(2, 1);
        CHECK_THROWS(mf_objective(MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 2), m, no_reg(1)));
    }
}

TEST_CASE("property: analytic gradient matches central differences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        MfConfig cfg;
        cfg.k = 2;
        cfg.lambda1 = 3.0 * u(rng);
        cfg.lambda2 = 3.0 * u(rng);
        const MatrixXd q = uniform(rng, 5, 4, 0.0, 2.0);
        MatrixXd mask = uniform(rng, 5, 4, 0.0, 1.0);
        mask = (mask.array() < 0.7).cast<double>();
        FactorModel<double> m;
        m.user_factors = uniform(rng, 5, 2, -1.0, 1.0);
        m.category_factors = uniform(rng, 4, 2, -1.0, 1.0);
        const FactorModel<double> grad = mf_gradient(q, mask, m, cfg);
        for (bool user_block : {true, false}) {
            const MatrixXd& g = user_block ? grad.user_factors : grad.category_factors;
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                for (Eigen::Index c = 0; c < g.cols(); ++c) {
                    const double fd = central_difference(q, mask, m, cfg, user_block, r, c);
                    CHECK(std::abs(g(r, c) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
                }
            }
        }
    }
}

TEST_CASE("stationary points") {
    std::mt19937_64 rng(9);
    FactorModel<double> m;
    m.user_factors = uniform(rng, 4, 2, 0.0, 1.0);
    m.category_factors = uniform(rng, 3, 2, 0.0, 1.0);
    const MatrixXd q = m.predict();
    const FactorModel<double> next = gradient_step(q, MatrixXd::Ones(4, 3), m, no_reg(2));
    CHECK(next.user_factors == m.user_factors);
    CHECK(next.category_factors == m.category_factors);

    FactorModel<double> zero;
    zero.user_factors = MatrixXd::Zero(4, 2);
    zero.category_factors = MatrixXd::Zero(3, 2);
    const FactorModel<double> still = gradient_step(uniform(rng, 4, 3, 0.0, 1.0), MatrixXd::Ones(4, 3), zero, no_reg(2));
    CHECK(still.user_factors.isZero(0.0));
    CHECK(still.category_factors.isZero(0.0));
}

TEST_CASE("property: objective is non-increasing with a small learning rate") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        MfConfig cfg;
        cfg.beta = 1e-3;
        cfg.max_iters = 2000;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const MatrixXd q = uniform(rng, 10, 9, 0.0, 1.5);
        const MatrixXd mask = (uniform(rng, 10, 9, 0.0, 1.0).array() < 0.6).cast<double>();
        const auto fit = fit_factors(q, mask, cfg, true);
        for (std::size_t s = 1; s < fit.objective_trace.size(); ++s) {
            CHECK(fit.objective_trace[s] <= fit.objective_trace[s - 1]);
        }
    }
}

TEST_CASE("seeded determinism") {
    std::mt19937_64 rng(2);
    const MatrixXd q = uniform(rng, 6, 5, 0.0, 1.0);
    const MatrixXd mask = (uniform(rng, 6, 5, 0.0, 1.0).array() < 0.7).cast<double>();
    MfConfig cfg;
    cfg.seed = 44;
    const auto a = fit_factors(q, mask, cfg);
    const auto b = fit_factors(q, mask, cfg);
    CHECK(a.model.user_factors == b.model.user_factors);
    CHECK(a.model.category_factors == b.model.category_factors);
    cfg.seed = 45;
    const auto c = fit_factors(q, mask, cfg);
    CHECK(c.model.user_factors != a.model.user_factors);

    const auto init = init_factors(6, 5, cfg);
    CHECK(init.user_factors.minCoeff() >= 0.0);
    CHECK(init.user_factors.maxCoeff() <= 0.1);
}

TEST_CASE("rank-1 matrix: the hidden entry is recovered") {
    const Eigen::Vector3d w(1.0, 2.0, 3.0);
    const Eigen::Vector2d theta(0.3, 0.45);
    const MatrixXd q = w * theta.transpose();
    MatrixXd mask = MatrixXd::Ones(3, 2);
    mask(1, 1) = 0.0; // 2 * 0.45 = 0.9
    MfConfig cfg;
    cfg.k = 1;
    cfg.lambda1 = cfg.lambda2 = 1e-4;
    cfg.max_iters = 200000;
    cfg.tol = 1e-15;
    const Completion out = fill_missing(profile_from(q, mask), cfg);
    CHECK(out.profile.provenance(1, 1) == Provenance::Latent);
    CHECK(out.profile.value(1, 1) == Approx(0.9).epsilon(0.02 / 0.9));
    CHECK(std::abs(out.profile.value(1, 1) - 0.9) < 0.02);
}

TEST_CASE("property: held-out entries of exact low-rank matrices") {
    for (int rank = 1; rank <= 3; ++rank) {
        std::mt19937_64 rng(100 + rank);
        const MatrixXd w = uniform(rng, 20, rank, 0.2, 1.0);
        const MatrixXd theta = uniform(rng, 12, rank, 0.2, 1.0);
        const MatrixXd q = w * theta.transpose();
        const MatrixXd mask = (uniform(rng, 20, 12, 0.0, 1.0).array() >= 0.2).cast<double>();
        REQUIRE(mask.rowwise().sum().minCoeff() >= rank);
        REQUIRE(mask.colwise().sum().minCoeff() >= rank);
        MfConfig cfg;
        cfg.k = rank;
        cfg.lambda1 = cfg.lambda2 = 1e-4;
        cfg.beta = 0.01;
        cfg.max_iters = 200000;
        cfg.tol = 1e-14;
        const auto fit = fit_factors(q, mask, cfg);
        const MatrixXd pred = fit.model.predict();
        double se = 0.0;
        int n = 0;
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            for (Eigen::Index c = 0; c < q.cols(); ++c) {
                if (mask(i, c) > 0.0) continue;
                se += (pred(i, c) - q(i, c)) * (pred(i, c) - q(i, c));
                ++n;
            }
        }
        REQUIRE(n > 0);
        const double rmse = std::sqrt(se / n);
        MESSAGE("rank " << rank << " held-out rmse " << rmse << " after " << fit.iterations << " sweeps");
        CHECK(rmse < 0.05);
    }
}

TEST_CASE("fully observed matrix passes through") {
    std::mt19937_64 rng(3);
    const MatrixXd q = uniform(rng, 4, 3, 0.0, 2.0);
    const Completion out = fill_missing(profile_from(q, MatrixXd::Ones(4, 3)), MfConfig{});
    CHECK(out.profile.values() == q);
    CHECK(out.profile.count(Provenance::Estimated) == 12);
}

TEST_CASE("rows or columns without estimates get the observed mean") {
    MatrixXd q(3, 2), mask(3, 2);
    q << 1.0, 2.0, 3.0, 4.0, 0.0, 0.0;
    mask << 1, 1, 1, 1, 0, 0;
    const Completion out = fill_missing(profile_from(q, mask), MfConfig{});
    CHECK(out.profile.provenance(2, 0) == Provenance::Default);
    CHECK(out.profile.value(2, 1) == 2.5);
    CHECK_THROWS_AS(fill_missing(profile_from(q, MatrixXd::Zero(3, 2)), MfConfig{}), InputError);
}

TEST_CASE("latent predictions are clamped to the observed range") {
    std::mt19937_64 rng(12);
    const MatrixXd q = uniform(rng, 8, 6, 0.0, 3.0);
    const MatrixXd mask = (uniform(rng, 8, 6, 0.0, 1.0).array() < 0.6).cast<double>();
    const Completion out = fill_missing(profile_from(q, mask), MfConfig{});
    const double top = q.cwiseProduct(mask).maxCoeff();
    for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index c = 0; c < 6; ++c)
            if (out.profile.provenance(i, c) == Provenance::Latent) {
                CHECK(out.profile.value(i, c) >= 0.0);
                CHECK(out.profile.value(i, c) <= top);
            }
}

TEST_CASE("default configuration converges on the 10 x 9 fixture profile") {
    const Dataset ds = load_dataset(kData + "/table2_dataset.json");
    const ProfileResult r = profile_all(ds, EngineConfig{});
    MfConfig cfg; // k = 3, lambda1 = lambda2 = 5
    const Completion out = fill_missing(r.profile, cfg);
    CHECK(out.fit.converged);
    CHECK(out.fit.iterations <= cfg.max_iters);
    CHECK(out.profile.count(Provenance::Missing) == 0);
    CHECK(out.profile.count(Provenance::Latent) == r.profile.count(Provenance::Missing));
}

TEST_CASE("divergence is a numerical error") {
    std::mt19937_64 rng(4);
    const MatrixXd q = uniform(rng, 6, 5, 5.0, 10.0);
    MfConfig cfg;
    cfg.beta = 5.0;
    CHECK_THROWS_AS(fit_factors(q, MatrixXd::Ones(6, 5), cfg), NumericalError);
    cfg.beta = 0.0;
    CHECK_THROWS_AS(fit_factors(q, MatrixXd::Ones(6, 5), cfg), InputError);
}
