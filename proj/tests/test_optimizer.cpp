#include <catch2/catch_amalgamated.hpp>

#include "accdet/nn/optimizer.hpp"

using namespace accdet;
using Catch::Approx;

namespace {

// One-parameter network: a single 1x1 output layer (plus a dummy encoder).
NetworkParams scalar_params(double value) {
    NetworkParams p;
    p.encoder = LSTMCellParams::zeros(1, 1);
    p.encoder_output_dim = 1;
    p.classifier.push_back(DenseLayerParams::zeros(1, 1, {Activation::Kind::Sigmoid, 0.0}));
    p.classifier[0].w(0, 0) = value;
    p.dropout_rates = {0.0};
    return p;
}

GradientSet unit_gradient(const NetworkParams& like, double g) {
    GradientSet grads = zeros_like(like);
    grads.classifier[0].w(0, 0) = g;
    return grads;
}

double value_of(const NetworkParams& p) { return p.classifier[0].w(0, 0); }

}  // namespace

TEST_CASE("sgd without momentum is plain gradient descent", "[optimizer]") {
    auto params = scalar_params(1.0);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::SgdMomentum;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    Optimizer opt(cfg);
    opt.step(params, unit_gradient(params, 2.0));
    CHECK(value_of(params) == Approx(1.0 - 0.1 * 2.0).margin(1e-15));
}

TEST_CASE("sgd momentum accumulates velocity", "[optimizer]") {
    auto params = scalar_params(0.0);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::SgdMomentum;
    cfg.lr = 0.1;
    cfg.momentum = 0.8;
    Optimizer opt(cfg);
    const auto g = unit_gradient(params, 1.0);
    opt.step(params, g);
    CHECK(value_of(params) == Approx(-0.1).margin(1e-15));  // v1 = -0.1
    opt.step(params, g);
    CHECK(value_of(params) == Approx(-0.28).margin(1e-15));  // v2 = 0.8*(-0.1) - 0.1
}

TEST_CASE("adam first step moves by about lr", "[optimizer]") {
    auto params = scalar_params(0.0);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Adam;
    cfg.lr = 0.001;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.epsilon = 1e-8;
    Optimizer opt(cfg);
    opt.step(params, unit_gradient(params, 1.0));
    // Bias correction makes m^ = v^ = 1 at step 1, so dp = -lr / (1 + eps).
    CHECK(value_of(params) == Approx(-0.001).margin(1e-8));
}

TEST_CASE("adam scales steps by the gradient magnitude history", "[optimizer]") {
    auto params = scalar_params(0.0);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Adam;
    cfg.lr = 0.01;
    Optimizer opt(cfg);
    for (int i = 0; i < 50; ++i) opt.step(params, unit_gradient(params, 100.0));
    // Adaptive normalization keeps per-step movement near lr regardless of scale.
    CHECK(std::abs(value_of(params)) < 0.01 * 51);
    CHECK(std::abs(value_of(params)) > 0.01 * 25);
}

TEST_CASE("optimizer config validation", "[optimizer]") {
    OptimizerConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(Optimizer(bad), Error);
    bad.lr = 0.1;
    bad.momentum = 1.0;
    CHECK_THROWS_AS(Optimizer(bad), Error);
    bad.momentum = 0.5;
    bad.beta2 = 1.5;
    CHECK_THROWS_AS(Optimizer(bad), Error);
}
