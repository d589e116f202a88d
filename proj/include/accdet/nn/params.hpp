#pragma once
// Parameter containers for the LSTM/RNN encoder and the MLP classifier,
// with uniform tensor visitation used by the optimizer, serialization, and
// gradient checking. All tensors are doubles; biases are stored H x 1.
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "accdet/common.hpp"
#include "accdet/rng.hpp"

namespace accdet {

struct LSTMCellParams {
    Index input_size = 0;
    Index hidden_size = 0;
    Matrix w_ix, w_fx, w_cx, w_ox;  // hidden x input
    Matrix w_is, w_fs, w_cs, w_os;  // hidden x hidden
    Matrix w_oc;                    // hidden x hidden, feeds c_t into the output gate
    Matrix b_i, b_f, b_c, b_o;      // hidden x 1

    static LSTMCellParams zeros(Index input, Index hidden) {
        LSTMCellParams p;
        p.input_size = input;
        p.hidden_size = hidden;
        p.w_ix = p.w_fx = p.w_cx = p.w_ox = Matrix::Zero(hidden, input);
        p.w_is = p.w_fs = p.w_cs = p.w_os = p.w_oc = Matrix::Zero(hidden, hidden);
        p.b_i = p.b_f = p.b_c = p.b_o = Matrix::Zero(hidden, 1);
        return p;
    }
};

struct RnnCellParams {
    Index input_size = 0;
    Index hidden_size = 0;
    Matrix w_x;  // hidden x input
    Matrix w_s;  // hidden x hidden
    Matrix b;    // hidden x 1

    static RnnCellParams zeros(Index input, Index hidden) {
        RnnCellParams p;
        p.input_size = input;
        p.hidden_size = hidden;
        p.w_x = Matrix::Zero(hidden, input);
        p.w_s = Matrix::Zero(hidden, hidden);
        p.b = Matrix::Zero(hidden, 1);
        return p;
    }
};

enum class EncoderKind { Lstm, Rnn };

inline const char* to_string(EncoderKind k) { return k == EncoderKind::Lstm ? "lstm" : "rnn"; }

inline EncoderKind encoder_kind_from_string(std::string_view s) {
    if (s == "lstm") return EncoderKind::Lstm;
    if (s == "rnn") return EncoderKind::Rnn;
    fail("unknown encoder kind '", s, "'");
}

using EncoderParams = std::variant<LSTMCellParams, RnnCellParams>;

struct Activation {
    enum class Kind { LeakyRelu, Sigmoid, Identity };
    Kind kind = Kind::LeakyRelu;
    double slope = 0.01;  // LeakyRelu only

    double operator()(double h) const {
        switch (kind) {
            case Kind::LeakyRelu: return h > 0.0 ? h : slope * h;
            case Kind::Sigmoid: return 1.0 / (1.0 + std::exp(-h));
            case Kind::Identity: return h;
        }
        return h;
    }
};

struct DenseLayerParams {
    Matrix w;  // out x in
    Matrix b;  // out x 1
    Activation activation;

    Index in_size() const { return w.cols(); }
    Index out_size() const { return w.rows(); }

    static DenseLayerParams zeros(Index in, Index out, Activation act) {
        DenseLayerParams p;
        p.w = Matrix::Zero(out, in);
        p.b = Matrix::Zero(out, 1);
        p.activation = act;
        return p;
    }
};

struct NetworkParams {
    EncoderParams encoder;
    Index encoder_output_dim = 0;
    std::vector<DenseLayerParams> classifier;  // hidden layers + 1-unit sigmoid output
    std::vector<double> dropout_rates;         // one after the encoder, one after each hidden layer

    EncoderKind encoder_kind() const {
        return std::holds_alternative<LSTMCellParams>(encoder) ? EncoderKind::Lstm : EncoderKind::Rnn;
    }

    Index input_size() const {
        return std::visit([](const auto& e) { return e.input_size; }, encoder);
    }

    Index hidden_size() const {
        return std::visit([](const auto& e) { return e.hidden_size; }, encoder);
    }

    void validate() const {
        require(encoder_output_dim >= 1, "network: encoder_output_dim must be positive");
        require(hidden_size() == encoder_output_dim, "network: encoder hidden size ", hidden_size(),
                " != encoder_output_dim ", encoder_output_dim);
        require(!classifier.empty(), "network: classifier has no layers");
        const auto& out = classifier.back();
        require(out.out_size() == 1, "network: output layer must have exactly 1 unit, has ", out.out_size());
        require(out.activation.kind == Activation::Kind::Sigmoid, "network: output activation must be sigmoid");
        Index prev = encoder_output_dim;
        for (std::size_t l = 0; l < classifier.size(); ++l) {
            require(classifier[l].in_size() == prev, "network: layer ", l, " expects input ", classifier[l].in_size(),
                    " but gets ", prev);
            if (l + 1 < classifier.size())
                require(classifier[l].out_size() >= prev, "network: hidden layer ", l,
                        " narrows the feature space (", prev, " -> ", classifier[l].out_size(), ")");
            prev = classifier[l].out_size();
        }
        // dropout_rates[l] applies to the input of classifier layer l, so the
        // sites are: encoder output, then each hidden layer's output.
        require(dropout_rates.size() == classifier.size(), "network: expected ", classifier.size(),
                " dropout rates (encoder output + each hidden layer), got ", dropout_rates.size());
        for (double r : dropout_rates) require(r >= 0.0 && r < 1.0, "network: dropout rate ", r, " outside [0,1)");
    }
};

struct NetworkShape {
    EncoderKind encoder = EncoderKind::Lstm;
    Index input_size = 96;
    Index encoder_output_dim = 100;
    std::vector<Index> hidden_dims = {128, 160};
    double leaky_slope = 0.01;
    double dropout_rate = 0.2;
};

inline NetworkParams make_network(const NetworkShape& shape) {
    NetworkParams p;
    if (shape.encoder == EncoderKind::Lstm)
        p.encoder = LSTMCellParams::zeros(shape.input_size, shape.encoder_output_dim);
    else
        p.encoder = RnnCellParams::zeros(shape.input_size, shape.encoder_output_dim);
    p.encoder_output_dim = shape.encoder_output_dim;
    Index prev = shape.encoder_output_dim;
    for (Index h : shape.hidden_dims) {
        p.classifier.push_back(DenseLayerParams::zeros(prev, h, {Activation::Kind::LeakyRelu, shape.leaky_slope}));
        prev = h;
    }
    p.classifier.push_back(DenseLayerParams::zeros(prev, 1, {Activation::Kind::Sigmoid, 0.0}));
    p.dropout_rates.assign(p.classifier.size(), shape.dropout_rate);
    p.validate();
    return p;
}

// Uniform tensor visitation; fn(name, matrix&, fan_in). Order is fixed and
// shared by the optimizer, serialization, and initialization.
template <class Params, class Fn>
void visit_tensors(Params& p, Fn&& fn) {
    using Decayed = std::remove_cv_t<Params>;
    static_assert(std::is_same_v<Decayed, NetworkParams>);
    std::visit(
        [&](auto& enc) {
            using E = std::remove_cv_t<std::remove_reference_t<decltype(enc)>>;
            if constexpr (std::is_same_v<E, LSTMCellParams>) {
                fn("encoder.w_ix", enc.w_ix, enc.input_size);
                fn("encoder.w_fx", enc.w_fx, enc.input_size);
                fn("encoder.w_cx", enc.w_cx, enc.input_size);
                fn("encoder.w_ox", enc.w_ox, enc.input_size);
                fn("encoder.w_is", enc.w_is, enc.hidden_size);
                fn("encoder.w_fs", enc.w_fs, enc.hidden_size);
                fn("encoder.w_cs", enc.w_cs, enc.hidden_size);
                fn("encoder.w_os", enc.w_os, enc.hidden_size);
                fn("encoder.w_oc", enc.w_oc, enc.hidden_size);
                fn("encoder.b_i", enc.b_i, enc.hidden_size);
                fn("encoder.b_f", enc.b_f, enc.hidden_size);
                fn("encoder.b_c", enc.b_c, enc.hidden_size);
                fn("encoder.b_o", enc.b_o, enc.hidden_size);
            } else {
                fn("encoder.w_x", enc.w_x, enc.input_size);
                fn("encoder.w_s", enc.w_s, enc.hidden_size);
                fn("encoder.b", enc.b, enc.hidden_size);
            }
        },
        p.encoder);
    for (std::size_t l = 0; l < p.classifier.size(); ++l) {
        auto& layer = p.classifier[l];
        const std::string prefix = "classifier." + std::to_string(l) + ".";
        fn(prefix + "w", layer.w, layer.in_size());
        fn(prefix + "b", layer.b, layer.in_size());
    }
}

inline NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z = p;
    visit_tensors(z, [](const std::string&, Matrix& m, Index) { m.setZero(); });
    return z;
}

// Gradients mirror the parameter layout tensor for tensor.
using GradientSet = NetworkParams;

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor.
inline void init_params(NetworkParams& p, Rng& rng) {
    visit_tensors(p, [&](const std::string&, Matrix& m, Index fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
        for (Index c = 0; c < m.cols(); ++c)
            for (Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
    });
}

inline double global_grad_norm(const GradientSet& g) {
    double sq = 0.0;
    visit_tensors(const_cast<GradientSet&>(g),
                  [&](const std::string&, Matrix& m, Index) { sq += m.squaredNorm(); });
    return std::sqrt(sq);
}

// Global-norm clipping; returns the pre-clip norm.
inline double clip_gradients(GradientSet& g, double max_norm) {
    const double norm = global_grad_norm(g);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        visit_tensors(g, [&](const std::string&, Matrix& m, Index) { m *= scale; });
    }
    return norm;
}

}  // namespace accdet
