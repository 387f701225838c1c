#include <doctest.h>

#include <cmath>

#include "fairvar/errors.hpp"
#include "fairvar/metrics.hpp"
#include "oracles.hpp"

using namespace fairvar;

namespace {

GroupConfusion conf(GroupCounts g0, GroupCounts g1)
{
    GroupConfusion c;
    c.groups = {g0, g1};
    return c;
}

}  // namespace

TEST_CASE("confusion counts")
{
    const std::vector<int> y = {1, 1, 0, 0, 1, 0};
    const std::vector<int> a = {0, 0, 0, 1, 1, 1};
    const std::vector<int> p = {1, 0, 1, 0, 1, 1};
    const auto c = confusion(p, y, a);
    CHECK(c.groups[0] == GroupCounts{1, 1, 0, 1});
    CHECK(c.groups[1] == GroupCounts{1, 1, 1, 0});

    const auto same = confusion(y, y, a);
    for (const auto& g : same.groups) {
        CHECK(g.fp == 0);
        CHECK(g.fn == 0);
    }
    std::vector<int> flipped;
    for (int v : y) {
        flipped.push_back(1 - v);
    }
    for (const auto& g : confusion(flipped, y, a).groups) {
        CHECK(g.tp == 0);
        CHECK(g.tn == 0);
    }
}

TEST_CASE("f1")
{
    CHECK(f1(conf({2, 1, 5, 1}, {0, 0, 3, 0})) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(f1(conf({3, 0, 2, 0}, {1, 0, 1, 0})) == 100.0);
    CHECK(f1(conf({0, 0, 2, 3}, {0, 0, 1, 1})) == 0.0);
    CHECK_THROWS_AS(f1(conf({0, 0, 2, 0}, {0, 0, 1, 0})), UndefinedMetricError);
}

TEST_CASE("average odds, equal opportunity, demographic parity")
{
    // TPR 0.9 vs 0.8, FPR 0.1 vs 0.05.
    const auto c = conf({9, 10, 90, 1}, {8, 5, 95, 2});
    CHECK(average_odds(c) == doctest::Approx(7.5).epsilon(1e-12));
    CHECK(equal_opportunity(c) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(average_odds(conf(c.groups[1], c.groups[0])) == average_odds(c));

    const auto same_rates = conf({4, 1, 9, 1}, {8, 2, 18, 2});
    CHECK(average_odds(same_rates) == 0.0);
    CHECK(equal_opportunity(same_rates) == 0.0);

    const auto equal_fpr = conf({9, 1, 9, 1}, {8, 1, 9, 2});
    CHECK(average_odds(equal_fpr) == doctest::Approx(equal_opportunity(equal_fpr) / 2.0).epsilon(1e-12));

    // Predicted-positive counts 30 and 40.
    const auto dp = conf({20, 10, 5, 5}, {30, 10, 5, 5});
    CHECK(demographic_parity(dp) == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(demographic_parity(conf({60, 30, 5, 5}, {90, 30, 5, 5})) == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(demographic_parity(conf({3, 0, 1, 1}, {2, 1, 1, 1})) == 0.0);

    CHECK_THROWS_AS(average_odds(conf({0, 1, 1, 0}, {1, 1, 1, 1})), UndefinedMetricError);
    CHECK_THROWS_AS(demographic_parity(conf({0, 0, 1, 1}, {1, 1, 1, 1})), UndefinedMetricError);
}

TEST_CASE("subgroup accuracy")
{
    const std::vector<int> y = {1, 0, 1, 0, 1, 0, 1, 0};
    const std::vector<int> a = {0, 0, 0, 0, 1, 1, 1, 1};
    const auto perfect = subgroup_accuracy(y, y, a);
    for (double v : perfect) {
        CHECK(v == 100.0);
    }
    const std::vector<int> ones(8, 1);
    const auto all_pos = subgroup_accuracy(ones, y, a);
    CHECK(all_pos == std::array<double, 4>{100.0, 0.0, 100.0, 0.0});

    const std::vector<int> p = {1, 1, 0, 0, 1, 0, 1, 1};
    const auto acc = subgroup_accuracy(p, y, a);
    CHECK(acc == std::array<double, 4>{50.0, 50.0, 100.0, 50.0});
}

TEST_CASE("metrics agree with a brute-force tally on random instances")
{
    Prng rng = Prng::from(314, 0);
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng.bounded(60);
        std::vector<int> p(n), y(n), a(n);
        const double bias = rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng.uniform() < bias ? 1 : 0;
            y[i] = static_cast<int>(rng.bounded(2));
            a[i] = static_cast<int>(rng.bounded(2));
        }
        const auto brute = oracle::brute_metrics(p, y, a);
        const auto c = confusion(p, y, a);
        for (int g = 0; g < 2; ++g) {
            CHECK(static_cast<long>(c.groups[g].tp) == brute.tp[g]);
            CHECK(static_cast<long>(c.groups[g].fp) == brute.fp[g]);
            CHECK(static_cast<long>(c.groups[g].tn) == brute.tn[g]);
            CHECK(static_cast<long>(c.groups[g].fn) == brute.fn[g]);
        }
        const auto rec = make_record(1, p, y, a);
        auto same = [](double got, const std::optional<double>& want) {
            return want ? std::abs(got - *want) <= 1e-9 : std::isnan(got);
        };
        CHECK(same(rec.f1, brute.f1));
        CHECK(same(rec.avg_odds, brute.avg_odds));
        CHECK(same(rec.eopp, brute.eopp));
        CHECK(same(rec.dp, brute.dp));
        CHECK(same(rec.accuracy, brute.accuracy));
        for (int s = 0; s < 4; ++s) {
            CHECK(same(rec.subgroup_accuracy[s], brute.subgroup_acc[s]));
        }
    }
}

TEST_CASE("metric names")
{
    for (Metric m : {Metric::f1, Metric::avg_odds, Metric::eopp, Metric::dp, Metric::accuracy}) {
        CHECK(parse_metric(metric_name(m)) == m);
    }
    CHECK_THROWS(parse_metric("nope"));
}
