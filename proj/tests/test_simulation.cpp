#include <doctest.h>

#include <cmath>
#include <random>

#include "support/builder.hpp"
#include "veritas/errors.hpp"
#include "veritas/metrics.hpp"
#include "veritas/simulation.hpp"

using namespace veritas;
using veritas::testing::DatasetBuilder;
using doctest::Approx;

namespace {

double fraction(const std::vector<UserGroup>& g, UserGroup which) {
    return static_cast<double>(std::count(g.begin(), g.end(), which)) / static_cast<double>(g.size());
}

// One user, n tasks in one category, fixed true reliability q.
GroundTruthBundle flat_truth(std::size_t n, double q, DataType type = DataType::Continuous) {
    GroundTruthBundle t;
    t.users = {"u000"};
    t.categories = {"c000"};
    t.groups = {UserGroup::Normal};
    t.true_reliability = Eigen::MatrixXd::Constant(1, 1, q);
    for (std::size_t j = 0; j < n; ++j) {
        t.tasks.push_back("t" + std::to_string(j));
        t.task_category.push_back(0);
        if (type == DataType::Continuous) t.true_values[t.tasks.back()] = 50.0;
        else t.true_values[t.tasks.back()] = std::string("L2");
    }
    return t;
}

SimConfig all_selected(std::uint64_t seed) {
    SimConfig c;
    c.selection_rate = 1.0;
    c.seed = seed;
    return c;
}

struct Moments {
    double mean = 0.0, variance = 0.0;
};

Moments moments(const Dataset& ds) {
    std::vector<double> x;
    for (const Observation& o : ds.observations()) x.push_back(as_real(o.value));
    Moments m;
    for (double v : x) m.mean += v / static_cast<double>(x.size());
    for (double v : x) m.variance += (v - m.mean) * (v - m.mean) / static_cast<double>(x.size() - 1);
    return m;
}

} // namespace

TEST_CASE("group assignment fractions") {
    SimConfig c;
    c.n_users = 10000;
    c.setting = Setting::S1;
    auto g = assign_groups(c);
    for (UserGroup which : {UserGroup::Reliable, UserGroup::Normal, UserGroup::Unreliable})
        CHECK(std::abs(fraction(g, which) - 1.0 / 3.0) <= 0.02);
    c.setting = Setting::S2;
    g = assign_groups(c);
    CHECK(std::abs(fraction(g, UserGroup::Reliable) - 0.6) <= 0.02);
    CHECK(std::abs(fraction(g, UserGroup::Normal) - 0.3) <= 0.02);
    c.setting = Setting::S3;
    g = assign_groups(c);
    CHECK(std::abs(fraction(g, UserGroup::Unreliable) - 0.6) <= 0.02);
    CHECK(std::abs(fraction(g, UserGroup::Reliable) - 0.1) <= 0.02);
    CHECK(assign_groups(c) == g);

    // Growing the population extends the assignment.
    SimConfig small = c;
    small.n_users = 50;
    const auto head = assign_groups(small);
    CHECK(std::equal(head.begin(), head.end(), g.begin()));
}

TEST_CASE("ground truth draw") {
    SimConfig c;
    c.seed = 3;
    const GroundTruthBundle t = draw_ground_truth(c);
    CHECK(t.users.size() == 100);
    CHECK(t.tasks.size() == 1000);
    CHECK(t.categories.size() == 20);
    CHECK(t.true_reliability.rows() == 100);
    CHECK(t.true_reliability.cols() == 20);
    CHECK(t.true_reliability.minCoeff() >= 0.05);
    CHECK(t.known_tasks.size() == 10);
    CHECK(t.hidden_truths().size() == 990);
    for (const auto& [task, v] : t.true_values) {
        CHECK(as_real(v) >= 30.0);
        CHECK(as_real(v) <= 100.0);
    }
    double reliable = 0.0, unreliable = 0.0;
    int nr = 0, nu = 0;
    for (std::size_t u = 0; u < 100; ++u) {
        const double mean = t.true_reliability.row(static_cast<Eigen::Index>(u)).mean();
        if (t.groups[u] == UserGroup::Reliable) reliable += mean, ++nr;
        if (t.groups[u] == UserGroup::Unreliable) unreliable += mean, ++nu;
    }
    CHECK(reliable / nr == Approx(0.75).epsilon(0.02 / 0.75));
    CHECK(unreliable / nu == Approx(0.25).epsilon(0.03 / 0.25));
}

TEST_CASE("noise model") {
    SUBCASE("q = 0.5 gives standard deviation 2") {
        const Dataset ds = realize_dataset(all_selected(1), flat_truth(10000, 0.5));
        REQUIRE(ds.observations().size() == 10000);
        const double sd = std::sqrt(moments(ds).variance);
        CHECK(sd >= 1.9);
        CHECK(sd <= 2.1);
    }
    SUBCASE("property: variance 2/q within 5%") {
        for (double q : {0.3, 0.75, 1.2}) {
            const Moments m = moments(realize_dataset(all_selected(7), flat_truth(10000, q)));
            CHECK(m.variance == Approx(2.0 / q).epsilon(0.05));
            CHECK(std::abs(m.mean - 50.0) < 4.0 * std::sqrt(2.0 / q / 10000.0));
        }
    }
}

TEST_CASE("selection and failure model") {
    SUBCASE("selection rate 0 gives no data") {
        SimConfig c;
        c.selection_rate = 0.0;
        const auto [ds, truth] = generate_dataset(c);
        CHECK(ds.observations().empty());
        CHECK(ds.events().empty());
    }
    SUBCASE("q = 0.1 fails about half the selections") {
        const Dataset ds = realize_dataset(all_selected(5), flat_truth(1000, 0.1));
        const double completed = static_cast<double>(ds.observations().size()) / 1000.0;
        CHECK(std::abs(completed - 0.5) <= 0.05);
        const auto r = ds.completion_ratio("u000", "c000");
        REQUIRE(r.has_value());
        CHECK(*r == completed);
    }
    SUBCASE("reliable users never fail") {
        const Dataset ds = realize_dataset(all_selected(5), flat_truth(500, 0.2));
        CHECK(ds.observations().size() == 500);
    }
    SUBCASE("selection rate is honoured") {
        SimConfig c = all_selected(9);
        c.selection_rate = 0.3;
        const Dataset ds = realize_dataset(c, flat_truth(5000, 0.8));
        CHECK(std::abs(static_cast<double>(ds.observations().size()) / 5000.0 - 0.3) <= 0.02);
    }
    SUBCASE("categorical reports") {
        SimConfig c = all_selected(11);
        c.data_type = DataType::Categorical;
        const Dataset ds = realize_dataset(c, flat_truth(5000, 0.5, DataType::Categorical));
        std::size_t right = 0;
        for (const Observation& o : ds.observations()) {
            const std::string& l = as_label(o.value);
            CHECK((l.size() == 2 && l[0] == 'L' && l[1] >= '0' && l[1] <= '4'));
            right += l == "L2";
        }
        CHECK(std::abs(static_cast<double>(right) / 5000.0 - 0.75) <= 0.02);
    }
}

TEST_CASE("invalid configurations name the field") {
    SimConfig c;
    c.n_users = 0;
    try {
        c.validate();
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("n_users") != std::string::npos);
    }
    c = SimConfig{};
    c.selection_rate = 1.5;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = SimConfig{};
    c.truth_low = 100.0;
    c.truth_high = 30.0;
    CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("seeded generation is deterministic end to end") {
    SimConfig c;
    c.n_users = 20;
    c.n_tasks = 100;
    c.seed = 12;
    const auto a = generate_dataset(c);
    const auto b = generate_dataset(c);
    CHECK(dataset_to_json(a.first) == dataset_to_json(b.first));
    CHECK(ground_truth_to_json(a.second) == ground_truth_to_json(b.second));
    CHECK(evaluate_unit(c, all_algorithms()) == evaluate_unit(c, all_algorithms()));
    c.seed = 13;
    CHECK(dataset_to_json(generate_dataset(c).first) != dataset_to_json(a.first));
}

TEST_CASE("metric examples") {
    const TruthMap truth{{"a", 30.0}, {"b", 40.0}};
    CHECK(rmse(TruthMap{{"a", 33.0}, {"b", 44.0}}, truth) == Approx(std::sqrt(12.5)));
    CHECK(rmse(truth, truth) == 0.0);
    CHECK(rmse(TruthMap{{"a", 35.0}}, truth) == 5.0);
    CHECK_THROWS_AS(rmse(TruthMap{{"z", 1.0}}, truth), InputError);

    using S = std::string;
    TruthMap labels, est;
    for (int k = 0; k < 5; ++k) {
        labels["t" + std::to_string(k)] = S("A");
        est["t" + std::to_string(k)] = S(k < 2 ? "B" : "A");
    }
    CHECK(error_rate(est, labels) == Approx(0.4));
    CHECK(error_rate(labels, labels) == 0.0);
    for (auto& [k, v] : est) v = S("C");
    CHECK(error_rate(est, labels) == 1.0);
    CHECK_THROWS_AS(error_rate(TruthMap{{"q", S("A")}}, labels), InputError);
}

TEST_CASE("property: metrics match a direct recomputation") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        TruthMap truth, est, lt, le;
        double se = 0.0;
        int n = 0, wrong = 0, nl = 0;
        for (int k = 0; k < 20; ++k) {
            const std::string id = "t" + std::to_string(k);
            const double x = u(rng);
            truth[id] = x;
            if (rng() % 3) {
                const double e = u(rng);
                est[id] = e;
                se += (e - x) * (e - x);
                ++n;
            }
            const std::string a = (rng() % 2) ? "A" : "B", b = (rng() % 2) ? "A" : "B";
            lt[id] = a;
            if (rng() % 3) {
                le[id] = b;
                wrong += a != b;
                ++nl;
            }
        }
        if (n == 0 || nl == 0) continue;
        CHECK(rmse(est, truth) == Approx(std::sqrt(se / n)).epsilon(1e-12));
        CHECK(error_rate(le, lt) == Approx(static_cast<double>(wrong) / nl).epsilon(1e-12));
    }
}

TEST_CASE("known-truth sampling") {
    DatasetBuilder b;
    for (int t = 0; t < 6; ++t) b.task("t" + std::to_string(t), "c");
    b.task("x0", "d").task("x1", "d");
    for (int u = 0; u < 5; ++u) b.observe("u" + std::to_string(u), "t3", 10.0 + u * 0.01);
    for (int t : {0, 1, 2, 4, 5}) {
        b.observe("u0", "t" + std::to_string(t), 10.0);
        b.observe("u1", "t" + std::to_string(t), t == 4 ? 30.0 : 10.5);
    }
    b.observe("u0", "x0", 1.0).observe("u1", "x1", 2.0);
    const Dataset ds = b.build();
    TruthMap truth;
    for (const Task& t : ds.tasks()) truth[t.id] = 10.0;

    CHECK(sample_known_truths(ds, truth, 0.0, KnownTruthStrategy::Random).empty());
    const auto most = sample_known_truths(ds, truth, 0.1, KnownTruthStrategy::MostContributors);
    CHECK(most.count("t3") == 1);
    CHECK(most.size() == 2); // ceil(0.6) in c, ceil(0.2) in d
    const auto var = sample_known_truths(ds, truth, 0.1, KnownTruthStrategy::MaxVariance);
    CHECK(var.count("t4") == 1);
    const auto half = sample_known_truths(ds, truth, 0.5, KnownTruthStrategy::Random, 8);
    CHECK(half.size() == 4);
    CHECK(sample_known_truths(ds, truth, 0.5, KnownTruthStrategy::Random, 8) == half);
    CHECK(sample_known_truths(ds, truth, 1.0, KnownTruthStrategy::Random).size() == 8);
}

TEST_CASE("ordering: E2 below BA at every user count in the majority-unreliable setting") {
    SimConfig c;
    c.setting = Setting::S3;
    const std::vector<Algorithm> algs{Algorithm::Average, Algorithm::UrpBa, Algorithm::UrpE2};
    const ExperimentTable table = run_experiment(c, SweepAxis::Users, {}, algs);
    REQUIRE(table.rows.size() == 30);
    for (const char* a : {"avg", "urp-ba", "urp-e2"}) {
        for (int n = 10; n <= 100; n += 10) {
            const MetricRow& r = table.at(a, n);
            CHECK(r.seed_count == 20);
            CHECK(r.samples.size() == 20);
            CHECK(r.metric == "rmse");
            CHECK(std::isfinite(r.mean));
        }
    }
    for (int n = 10; n <= 100; n += 10) {
        const double ba = table.at("urp-ba", n).mean, e2 = table.at("urp-e2", n).mean;
        INFO("users " << n << ": BA " << ba << " E2 " << e2);
        CHECK(e2 < ba);
    }
}

TEST_CASE("single-point experiment reproduces byte for byte") {
    SimConfig c;
    c.n_users = 30;
    c.n_tasks = 200;
    c.repetitions = 1;
    c.seed = 99;
    const std::string a = run_experiment(c).to_csv();
    const std::string b = run_experiment(c).to_csv();
    CHECK(a == b);
    CHECK(a.rfind("algorithm,setting,sweep_axis,sweep_value,seed_count,metric,mean,std\n", 0) == 0);
    CHECK(std::count(a.begin(), a.end(), '\n') == 6);
}

TEST_CASE("categorical experiments report error rates") {
    SimConfig c;
    c.n_users = 30;
    c.n_tasks = 200;
    c.repetitions = 2;
    c.data_type = DataType::Categorical;
    const ExperimentTable t = run_experiment(c);
    CHECK(t.at("voting").metric == "error_rate");
    for (const MetricRow& r : t.rows) {
        CHECK(r.mean >= 0.0);
        CHECK(r.mean <= 1.0);
    }
}
