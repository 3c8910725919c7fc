#include <doctest.h>

#include <filesystem>
#include <random>

#include "support/builder.hpp"
#include "support/oracles.hpp"
#include "veritas/errors.hpp"

using namespace veritas;
using veritas::testing::DatasetBuilder;

namespace {

const std::string kData = VERITAS_TEST_DATA;

template <class Fn>
DatasetError::Kind dataset_error_kind(Fn&& fn, std::string* message = nullptr, int* line = nullptr) {
    try {
        fn();
    } catch (const DatasetError& e) {
        if (message) *message = e.what();
        if (line) *line = e.line();
        return e.kind();
    }
    FAIL("expected a DatasetError");
    return DatasetError::Kind::Parse;
}

} // namespace

TEST_CASE("table-2 shaped fixture loads with 123 tasks in 9 categories") {
    const Dataset ds = load_dataset(kData + "/table2_dataset.json");
    CHECK(ds.users().size() == 10);
    CHECK(ds.tasks().size() == 123);
    CHECK(ds.categories().size() == 9);
    std::size_t unknown = 0;
    for (std::size_t c = 0; c < ds.categories().size(); ++c) unknown += ds.unknown_tasks(c).size();
    CHECK(unknown == 123);
    const std::vector<std::size_t> sizes{8, 9, 11, 20, 20, 9, 12, 17, 17};
    for (std::size_t c = 0; c < 9; ++c) CHECK(ds.unknown_tasks(c).size() == sizes[c]);
}

TEST_CASE("empty observation list gives empty contributor sets") {
    const Dataset ds = DatasetBuilder().user("a").task("t1", "c1").task("t2", "c2").build();
    for (const auto& c : ds.categories()) {
        CHECK(ds.contributor_sets(c).contributors.empty());
        CHECK(ds.contributor_sets(c).known_contributors.empty());
    }
}

TEST_CASE("reference to a missing task names it") {
    std::string msg;
    const auto kind = dataset_error_kind(
        [] { DatasetBuilder().task("t1", "c").observe("a", "t999", 1.0).build(); }, &msg);
    CHECK(kind == DatasetError::Kind::Reference);
    CHECK(msg.find("t999") != std::string::npos);
}

TEST_CASE("parse errors carry the record's line number") {
    const std::string text = R"({
  "users": ["a", "b"],
  "tasks": [
    {"id": "t1", "category": "c", "data_type": "continuous"},
    {"id": "t2", "category": "c", "data_type": "categorical"}
  ],
  "observations": [
    {"user": "a", "task": "t1", "value": 1.5},
    {"user": "b", "task": "t2", "value": 3.0}
  ],
  "events": []
})";
    int line = 0;
    std::string msg;
    CHECK(dataset_error_kind([&] { parse_dataset(text); }, &msg, &line) == DatasetError::Kind::Type);
    CHECK(line == 9);
    CHECK(msg.rfind("line 9: ", 0) == 0);

    CHECK(dataset_error_kind([] { parse_dataset("{\"users\": [}"); }) == DatasetError::Kind::Parse);
}

TEST_CASE("validation rejects duplicates, bad values and broken event chains") {
    using K = DatasetError::Kind;
    CHECK(dataset_error_kind([] { DatasetBuilder().user("a").user("b").task("t", "c").task("t", "c").build(); }) ==
          K::Duplicate);
    CHECK(dataset_error_kind([] {
              DatasetBuilder().task("t", "c").observe("a", "t", 1.0).observe_only("a", "t", 2.0).build();
          }) == K::Duplicate);
    CHECK(dataset_error_kind([] {
              DatasetBuilder().task("t", "c").observe_only("a", "t", std::numeric_limits<double>::infinity()).build();
          }) == K::Type);
    CHECK(dataset_error_kind([] {
              DatasetBuilder().task("t", "c", DataType::Categorical).observe_only("a", "t", std::string()).build();
          }) == K::Type);
    CHECK(dataset_error_kind([] {
              DatasetBuilder().task("t", "c", DataType::Continuous, Value{std::string("x")}).build();
          }) == K::Type);
    CHECK(dataset_error_kind([] {
              DatasetBuilder().task("t", "c").event("a", "t", Action::Completed).build();
          }) == K::Consistency);
    CHECK(dataset_error_kind([] {
              DatasetBuilder().task("t", "c").event("a", "t", Action::Selected).build();
          }) == K::Consistency);
}

TEST_CASE("completion ratio examples") {
    DatasetBuilder b;
    b.user("full").user("half").user("none");
    for (int k = 0; k < 4; ++k) b.task("t" + std::to_string(k), "c");
    for (int k = 0; k < 4; ++k) b.observe("full", "t" + std::to_string(k), 1.0);
    b.observe("half", "t0", 1.0).observe("half", "t1", 1.0).fail("half", "t2").fail("half", "t3");
    b.fail("none", "t0").fail("none", "t1").fail("none", "t2");
    const Dataset ds = b.build();
    CHECK(*ds.completion_ratio("full", "c") == 1.0);
    CHECK(*ds.completion_ratio("half", "c") == 0.5);
    CHECK_FALSE(ds.completion_ratio("none", "c").has_value());
}

TEST_CASE("contributor sets") {
    SUBCASE("no known-truth tasks") {
        const Dataset ds = DatasetBuilder().task("t", "c").observe("a", "t", 1.0).build();
        CHECK(ds.contributor_sets("c").known_contributors.empty());
    }
    SUBCASE("a user observing only a known-truth task is in both sets") {
        const Dataset ds = DatasetBuilder()
                               .task("s", "c")
                               .task("o", "c", DataType::Continuous, Value{5.0})
                               .observe("a", "s", 1.0)
                               .observe("b", "o", 4.0)
                               .build();
        const auto sets = ds.contributor_sets("c");
        CHECK(sets.contributors == std::vector<std::string>{"a", "b"});
        CHECK(sets.known_contributors == std::vector<std::string>{"b"});
    }
    SUBCASE("a user with no observation in the category is absent") {
        const Dataset ds = DatasetBuilder()
                               .task("s", "c")
                               .task("x", "d")
                               .observe("a", "s", 1.0)
                               .observe("b", "x", 1.0)
                               .build();
        CHECK(ds.contributor_sets("c").contributors == std::vector<std::string>{"a"});
    }
    CHECK_THROWS_AS(DatasetBuilder().task("t", "c").build().contributor_sets("zzz"), DomainError);
}

TEST_CASE("property: partition, completion ratio range and monotonicity on random datasets") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        DatasetBuilder b;
        const int n_tasks = 1 + static_cast<int>(rng() % 12);
        std::vector<std::string> tasks;
        for (int t = 0; t < n_tasks; ++t) {
            tasks.push_back("t" + std::to_string(t));
            const std::string cat = "c" + std::to_string(rng() % 3);
            if (rng() % 4 == 0) b.task(tasks.back(), cat, DataType::Continuous, Value{1.0});
            else b.task(tasks.back(), cat);
        }
        for (int u = 0; u < 4; ++u) {
            const std::string user = "u" + std::to_string(u);
            b.user(user);
            for (const auto& t : tasks) {
                switch (rng() % 4) {
                case 0: b.observe(user, t, static_cast<double>(rng() % 10)); break;
                case 1: b.fail(user, t); break;
                case 2: b.browse(user, t); break;
                default: break;
                }
            }
        }
        const Dataset ds = b.build();
        std::size_t covered = 0;
        std::set<std::size_t> seen;
        for (std::size_t c = 0; c < ds.categories().size(); ++c) {
            for (std::size_t t : ds.unknown_tasks(c)) {
                CHECK(seen.insert(t).second);
                CHECK(ds.task_category(t) == c);
            }
            for (std::size_t t : ds.known_tasks(c)) CHECK(seen.insert(t).second);
            covered += ds.unknown_tasks(c).size() + ds.known_tasks(c).size();
        }
        CHECK(covered == ds.tasks().size());
        for (const auto& u : ds.users()) {
            for (const auto& c : ds.categories()) {
                const auto r = ds.completion_ratio(u, c);
                CHECK(r == oracle::ratio(ds, u, c));
                if (r) CHECK((*r > 0.0 && *r <= 1.0));
            }
        }
    }

    // Adding completed events never lowers the ratio.
    DatasetBuilder b;
    b.task("t0", "c").task("t1", "c").task("t2", "c").observe("a", "t0", 1.0).fail("a", "t1").fail("a", "t2");
    const double before = *b.build().completion_ratio("a", "c");
    b.event("a", "t1", Action::Completed);
    CHECK(*b.build().completion_ratio("a", "c") >= before);
}

TEST_CASE("serialize then load is the identity") {
    const Dataset ds = load_dataset(kData + "/table2_dataset.json");
    const Dataset again = parse_dataset(dataset_to_json(ds));
    CHECK(dataset_to_json(again) == dataset_to_json(ds));
    CHECK(again.users() == ds.users());
    REQUIRE(again.observations().size() == ds.observations().size());
    for (std::size_t k = 0; k < ds.observations().size(); ++k) {
        CHECK(again.observations()[k].value == ds.observations()[k].value);
    }
}

TEST_CASE("known truths can be attached afterwards") {
    const Dataset ds = DatasetBuilder().task("t1", "c").task("t2", "c").observe("a", "t1", 1.0).build();
    const Dataset with = with_known_truths(ds, TruthMap{{"t2", 3.0}});
    CHECK(with.known_tasks(0).size() == 1);
    CHECK(with.unknown_tasks(0).size() == 1);
    CHECK_THROWS_AS(with_known_truths(ds, TruthMap{{"t2", std::string("x")}}), InputError);
}

TEST_CASE("unreadable dataset path is an input error naming the path") {
    try {
        load_dataset("/nonexistent/dir/data.json");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/data.json") != std::string::npos);
    }
}
