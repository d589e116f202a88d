#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "accdet/nn/backward.hpp"
#include "accdet/nn/train.hpp"

using namespace accdet;
using Catch::Approx;

namespace {

std::vector<WindowSample> random_windows(Index count, Index tsl, Index cols, Rng& rng, double positive_rate = 0.5) {
    std::vector<WindowSample> windows(static_cast<std::size_t>(count));
    for (auto& w : windows) {
        w.values.resize(tsl, cols);
        for (Index r = 0; r < tsl; ++r)
            for (Index c = 0; c < cols; ++c) w.values(r, c) = rng.uniform(-1.5, 1.5);
        w.label = rng.bernoulli(positive_rate) ? 1 : 0;
    }
    bool has_pos = false, has_neg = false;
    for (const auto& w : windows) (w.label ? has_pos : has_neg) = true;
    if (!has_pos) windows.front().label = 1;
    if (!has_neg) windows.back().label = 0;
    return windows;
}

NetworkParams random_network(const NetworkShape& shape, std::uint64_t seed) {
    auto p = make_network(shape);
    Rng rng(seed);
    init_params(p, rng);
    return p;
}

// Central finite differences against the same loss the backward pass reports.
// Checks every entry of every tensor; returns the worst relative error.
double max_gradient_error(NetworkParams& params, const TrainingBatch& batch, double w1, double w2,
                          const DropoutMasks* masks, double step = 1e-5) {
    const BackwardResult analytic = network_backward(params, batch, w1, w2, masks);
    std::vector<const Matrix*> grads;
    visit_tensors(const_cast<GradientSet&>(analytic.grads),
                  [&](const std::string&, Matrix& m, Index) { grads.push_back(&m); });

    double worst = 0.0;
    std::size_t ti = 0;
    visit_tensors(params, [&](const std::string& name, Matrix& m, Index) {
        const Matrix& g = *grads[ti++];
        for (Index c = 0; c < m.cols(); ++c) {
            for (Index r = 0; r < m.rows(); ++r) {
                const double saved = m(r, c);
                m(r, c) = saved + step;
                const double up = network_loss(params, batch, w1, w2, masks);
                m(r, c) = saved - step;
                const double down = network_loss(params, batch, w1, w2, masks);
                m(r, c) = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double analytic_v = g(r, c);
                const double denom = std::max({std::abs(numeric), std::abs(analytic_v), 1e-8});
                const double rel = std::abs(numeric - analytic_v) / denom;
                if (rel > worst) {
                    worst = rel;
                    UNSCOPED_INFO("worst so far: " << name << "(" << r << "," << c << ") analytic=" << analytic_v
                                                   << " numeric=" << numeric << " rel=" << rel);
                }
            }
        }
    });
    return worst;
}

}  // namespace

TEST_CASE("lstm gradients match central finite differences", "[nn][grad]") {
    NetworkShape shape;
    shape.encoder = EncoderKind::Lstm;
    shape.input_size = 5;
    shape.encoder_output_dim = 4;
    shape.hidden_dims = {4, 5};
    shape.dropout_rate = 0.0;
    auto params = random_network(shape, 21);

    Rng rng(22);
    const auto windows = random_windows(3, 3, 5, rng);
    const TrainingBatch batch = make_training_batch(windows, {0, 1, 2});

    CHECK(max_gradient_error(params, batch, 100.0, 1.0, nullptr) < 1e-4);
}

TEST_CASE("lstm gradients are exact under fixed dropout masks", "[nn][grad]") {
    NetworkShape shape;
    shape.encoder = EncoderKind::Lstm;
    shape.input_size = 4;
    shape.encoder_output_dim = 3;
    shape.hidden_dims = {3};
    shape.dropout_rate = 0.4;
    auto params = random_network(shape, 31);

    Rng rng(32);
    const auto windows = random_windows(4, 2, 4, rng);
    const TrainingBatch batch = make_training_batch(windows, {0, 1, 2, 3});
    Rng mask_rng(33);
    const DropoutMasks masks = make_dropout_masks(params, batch.size(), mask_rng);

    CHECK(max_gradient_error(params, batch, 2.0, 1.0, &masks) < 1e-4);
}

TEST_CASE("rnn gradients match central finite differences", "[nn][grad]") {
    NetworkShape shape;
    shape.encoder = EncoderKind::Rnn;
    shape.input_size = 5;
    shape.encoder_output_dim = 4;
    shape.hidden_dims = {4, 4};
    shape.dropout_rate = 0.0;
    auto params = random_network(shape, 41);

    Rng rng(42);
    const auto windows = random_windows(3, 4, 5, rng);
    const TrainingBatch batch = make_training_batch(windows, {0, 1, 2});

    CHECK(max_gradient_error(params, batch, 10.0, 2.0, nullptr) < 1e-4);
}

TEST_CASE("batched probabilities equal the per-sample eval path", "[nn]") {
    NetworkShape shape;
    shape.input_size = 6;
    shape.encoder_output_dim = 5;
    shape.hidden_dims = {5, 6};
    shape.dropout_rate = 0.0;
    auto params = random_network(shape, 51);

    Rng rng(52);
    const auto windows = random_windows(7, 4, 6, rng);
    std::vector<Index> all;
    for (Index i = 0; i < 7; ++i) all.push_back(i);
    const TrainingBatch batch = make_training_batch(windows, all);
    const BackwardResult result = network_backward(params, batch, 1.0, 1.0, nullptr);

    for (std::size_t i = 0; i < windows.size(); ++i) {
        const Vector enc = encode_sequence(params.encoder, windows[i].values);
        const double prob = classify(params, enc, ClassifyMode::Eval);
        REQUIRE(result.probabilities[i] == Approx(prob).margin(1e-12));
    }
}

TEST_CASE("duplicated sample gives the same mean gradient as the single sample", "[nn]") {
    NetworkShape shape;
    shape.input_size = 4;
    shape.encoder_output_dim = 3;
    shape.hidden_dims = {3};
    shape.dropout_rate = 0.0;
    auto params = random_network(shape, 61);

    Rng rng(62);
    const auto windows = random_windows(1, 3, 4, rng);
    const TrainingBatch single = make_training_batch(windows, {0});
    const TrainingBatch doubled = make_training_batch(windows, {0, 0});

    const auto g1 = network_backward(params, single, 7.0, 3.0, nullptr);
    const auto g2 = network_backward(params, doubled, 7.0, 3.0, nullptr);
    CHECK(g1.loss == Approx(g2.loss).margin(1e-12));

    std::vector<const Matrix*> t1, t2;
    visit_tensors(const_cast<GradientSet&>(g1.grads), [&](const std::string&, Matrix& m, Index) { t1.push_back(&m); });
    visit_tensors(const_cast<GradientSet&>(g2.grads), [&](const std::string&, Matrix& m, Index) { t2.push_back(&m); });
    for (std::size_t i = 0; i < t1.size(); ++i)
        CHECK((*t1[i] - *t2[i]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scaling both class weights scales all gradients linearly", "[nn]") {
    NetworkShape shape;
    shape.input_size = 4;
    shape.encoder_output_dim = 3;
    shape.hidden_dims = {4};
    shape.dropout_rate = 0.0;
    auto params = random_network(shape, 71);

    Rng rng(72);
    const auto windows = random_windows(5, 2, 4, rng);
    std::vector<Index> all = {0, 1, 2, 3, 4};
    const TrainingBatch batch = make_training_batch(windows, all);

    const double lambda = 3.5;
    const auto base = network_backward(params, batch, 4.0, 2.0, nullptr);
    const auto scaled = network_backward(params, batch, lambda * 4.0, lambda * 2.0, nullptr);
    CHECK(scaled.loss == Approx(lambda * base.loss).margin(1e-9));

    std::vector<const Matrix*> tb, ts;
    visit_tensors(const_cast<GradientSet&>(base.grads), [&](const std::string&, Matrix& m, Index) { tb.push_back(&m); });
    visit_tensors(const_cast<GradientSet&>(scaled.grads),
                  [&](const std::string&, Matrix& m, Index) { ts.push_back(&m); });
    for (std::size_t i = 0; i < tb.size(); ++i)
        CHECK((*ts[i] - lambda * *tb[i]).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, tb[i]->cwiseAbs().maxCoeff()));
}

TEST_CASE("non-finite loss reports the batch index", "[nn]") {
    NetworkShape shape;
    shape.input_size = 4;
    shape.encoder_output_dim = 3;
    shape.hidden_dims = {3};
    shape.dropout_rate = 0.0;
    auto params = random_network(shape, 81);

    Rng rng(82);
    auto windows = random_windows(3, 2, 4, rng);
    windows[2].values(1, 2) = std::numeric_limits<double>::quiet_NaN();
    const TrainingBatch batch = make_training_batch(windows, {0, 1, 2});
    CHECK_THROWS_WITH(network_backward(params, batch, 1.0, 1.0, nullptr),
                      Catch::Matchers::ContainsSubstring("batch index 2"));
}

TEST_CASE("gradient clipping caps the global norm", "[nn]") {
    NetworkShape shape;
    shape.input_size = 4;
    shape.encoder_output_dim = 3;
    shape.hidden_dims = {3};
    auto grads = random_network(shape, 91);  // any tensors work as a stand-in gradient set

    const double before = global_grad_norm(grads);
    REQUIRE(before > 1.0);
    const double reported = clip_gradients(grads, 1.0);
    CHECK(reported == Approx(before));
    CHECK(global_grad_norm(grads) == Approx(1.0).margin(1e-9));

    // Below the threshold nothing changes.
    auto copy = grads;
    clip_gradients(copy, 10.0);
    std::vector<const Matrix*> ta, tbv;
    visit_tensors(const_cast<GradientSet&>(grads), [&](const std::string&, Matrix& m, Index) { ta.push_back(&m); });
    visit_tensors(copy, [&](const std::string&, Matrix& m, Index) { tbv.push_back(&m); });
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tbv[i]);
}
