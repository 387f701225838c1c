#include <doctest.h>

#include <cmath>

#include "fairvar/errors.hpp"
#include "fairvar/training.hpp"

using namespace fairvar;

namespace {

Splits small_splits(std::size_t n = 400)
{
    SynthSpec s;
    s.n = n;
    s.dims = 3;
    s.seed = 2;
    return split(synth_generate(s), {0.7, 0.1, 0.2}, 1);
}

TrainConfig small_config()
{
    TrainConfig c;
    c.hidden_sizes = {8};
    c.batch_size = 16;
    c.learning_rate = 0.05;
    c.epochs = 6;
    c.window_first = 2;
    c.window_last = 5;
    c.weight_seed = 10;
    c.shuffle_seed = 11;
    return c;
}

}  // namespace

TEST_CASE("batches use ceiling division")
{
    DataOrder order;
    for (std::size_t i = 0; i < 10; ++i) {
        order.indices.push_back(i);
    }
    const auto b = make_batches(order, 4);
    REQUIRE(b.size() == 3);
    CHECK(b[0].size() == 4);
    CHECK(b[1].size() == 4);
    CHECK(b[2].size() == 2);
    CHECK(b[2] == std::vector<std::size_t>{8, 9});
}

TEST_CASE("train_epoch")
{
    const Splits s = small_splits();
    TrainConfig c = small_config();
    const std::vector<std::size_t> hidden = {8};
    const Model m0 = init_model(3, hidden, 1);
    const DataOrder order = reference_order(s.train.size(), 4);

    SUBCASE("determinism")
    {
        CHECK(train_epoch(m0, s.train, order, c, 1) == train_epoch(m0, s.train, order, c, 1));
        c.dropout_rate = 0.3;
        CHECK(train_epoch(m0, s.train, order, c, 2) == train_epoch(m0, s.train, order, c, 2));
        CHECK_FALSE(train_epoch(m0, s.train, order, c, 2) == train_epoch(m0, s.train, order, c, 3));
    }
    SUBCASE("lr 0 leaves the model unchanged")
    {
        c.learning_rate = 0.0;
        CHECK(train_epoch(m0, s.train, order, c, 1) == m0);
    }
    SUBCASE("step count equals the number of batches")
    {
        // Replaying make_batches by hand gives the same model.
        Model manual = m0;
        for (const auto& batch : make_batches(order, c.batch_size)) {
            const std::vector<std::vector<std::size_t>> one = {batch};
            manual = train_batches(manual, s.train, one, c, 1);
        }
        CHECK(manual == train_epoch(m0, s.train, order, c, 1));
    }
    SUBCASE("weighted loss with unit weights equals plain loss")
    {
        const std::vector<double> ones(s.train.size(), 1.0);
        const Model plain = train_epoch(m0, s.train, order, c, 1);
        const Model weighted = train_epoch(m0, s.train, order, c, 1, ones);
        for (std::size_t l = 0; l < plain.layers.size(); ++l) {
            for (std::size_t k = 0; k < plain.layers[l].weights.values.size(); ++k) {
                CHECK(weighted.layers[l].weights.values[k] ==
                      doctest::Approx(plain.layers[l].weights.values[k]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("train_run")
{
    const Splits s = small_splits();
    TrainConfig c = small_config();

    const RunResult a = train_run(s, c, {Retention::window, 3, true});
    const RunResult b = train_run(s, c, {Retention::window, 3, true});
    REQUIRE(a.trajectory.records.size() == 6);
    CHECK(a.trajectory.run_id == 3);
    CHECK(a.trajectory.weight_seed == 10);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(a.trajectory.records[i].epoch == static_cast<int>(i + 1));
        CHECK(a.trajectory.records[i].accuracy == b.trajectory.records[i].accuracy);
        CHECK(a.trajectory.records[i].f1 == b.trajectory.records[i].f1);
    }
    CHECK(a.final_model == b.final_model);
    CHECK(a.validation.records.size() == 6);
    REQUIRE(a.checkpoints.size() == 4);
    CHECK(a.checkpoints.front().epoch == 2);
    CHECK(a.checkpoints.back().epoch == 5);
    CHECK(a.initial_model == init_model(3, c.hidden_sizes, c.weight_seed));

    SUBCASE("epochs 0 gives the initial model")
    {
        c.epochs = 0;
        const RunResult r = train_run(s, c);
        CHECK(r.trajectory.records.empty());
        CHECK(r.final_model == r.initial_model);
    }
    SUBCASE("validation lists every violation")
    {
        c.batch_size = 0;
        c.learning_rate = -1.0;
        c.dropout_rate = 1.5;
        try {
            train_run(s, c);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.violations().size() == 3);
        }
    }
    SUBCASE("all loss kinds train to finite models")
    {
        for (LossKind k : {LossKind::plain_ce, LossKind::weighted_ce, LossKind::ce_plus_eo}) {
            c.loss = k;
            CHECK(train_run(s, c).final_model.all_finite());
            CHECK(parse_loss_kind(loss_kind_name(k)) == k);
        }
    }
}

TEST_CASE("mc dropout uncertainty")
{
    SUBCASE("zero model has zero spread")
    {
        const std::vector<std::size_t> hidden = {4};
        Model m = init_model(2, hidden, 0);
        for (auto& l : m.layers) {
            std::fill(l.weights.values.begin(), l.weights.values.end(), 0.0);
        }
        Matrix x;
        x.resize(3, 2);
        x.values = {1, 2, 3, 4, 5, 6};
        for (double s : mc_dropout_uncertainty(m, x, 50, 0.5, 1)) {
            CHECK(s == 0.0);
        }
    }
    SUBCASE("two-point distribution")
    {
        const std::vector<std::size_t> hidden = {1};
        Model m = init_model(1, hidden, 0);
        m.layers[0].weights.values = {1.0};
        m.layers[1].weights.values = {0.0, 0.7};
        m.layers[1].biases = {0.0, -0.2};
        Matrix x;
        x.resize(1, 1);
        x.values = {1.0};
        // Kept: hidden = 2 (inverted scale at rate 0.5); dropped: hidden = 0.
        const double pa = 1.0 / (1.0 + std::exp(-(0.7 * 2.0 - 0.2)));
        const double pb = 1.0 / (1.0 + std::exp(0.2));
        const auto s = mc_dropout_uncertainty(m, x, 10000, 0.5, 3);
        // std = |pa - pb| sqrt(q(1-q)); 3 sigma of q at 10^4 passes is 0.015.
        const double lo = std::abs(pa - pb) * std::sqrt(0.25 - 0.015 * 0.015);
        CHECK(s[0] <= std::abs(pa - pb) / 2.0 + 1e-12);
        CHECK(s[0] >= lo - 1e-12);
        CHECK(mc_dropout_uncertainty(m, x, 100, 0.5, 3) == mc_dropout_uncertainty(m, x, 100, 0.5, 3));
    }
    SUBCASE("rejections")
    {
        const std::vector<std::size_t> hidden = {1};
        const Model m = init_model(1, hidden, 0);
        Matrix x;
        x.resize(1, 1);
        CHECK_THROWS(mc_dropout_uncertainty(m, x, 10, 0.0, 1));
        CHECK_THROWS(mc_dropout_uncertainty(m, x, 1, 0.5, 1));
    }
}
