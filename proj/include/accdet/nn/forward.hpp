#pragma once
// Forward computation: LSTM cell, vanilla RNN cell, sequence encoding, the
// dropout + dense classifier head, and the weighted binary cross-entropy.
//
// LSTM cell:
//   i_t = sigma(W_ix x_t + W_is s_{t-1} + b_i)
//   f_t = sigma(W_fx x_t + W_fs s_{t-1} + b_f)
//   c_t = f_t o c_{t-1} + i_t o tanh(W_cx x_t + W_cs s_{t-1} + b_c)
//   o_t = sigma(W_ox x_t + W_os s_{t-1} + W_oc c_t + b_o)
//   s_t = o_t o tanh(c_t)
// Note o_t sees the *current* cell state through W_oc.
#include <cmath>
#include <optional>
#include <vector>

#include "accdet/nn/params.hpp"
#include "accdet/rng.hpp"

namespace accdet {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <class Derived>
auto sigmoid_array(const Eigen::ArrayBase<Derived>& a) {
    return 1.0 / (1.0 + (-a).exp());
}

struct LSTMState {
    Vector s;  // internal state, |entries| < 1 when produced by the cell
    Vector c;  // memory cell

    static LSTMState zero(Index hidden) { return {Vector::Zero(hidden), Vector::Zero(hidden)}; }
};

// Gate activations kept for backpropagation through time.
struct LstmStepCache {
    Vector i, f, g, o, c, c_prev, s_prev, tanh_c;
};

inline void check_dims(const LSTMCellParams& p, const Vector& x, const LSTMState& prev) {
    require(x.size() == p.input_size, "lstm_cell_forward: x_t has length ", x.size(), ", expected input size ",
            p.input_size);
    require(prev.s.size() == p.hidden_size, "lstm_cell_forward: prev.s has length ", prev.s.size(),
            ", expected hidden size ", p.hidden_size);
    require(prev.c.size() == p.hidden_size, "lstm_cell_forward: prev.c has length ", prev.c.size(),
            ", expected hidden size ", p.hidden_size);
}

inline LSTMState lstm_cell_forward(const LSTMCellParams& p, const Vector& x, const LSTMState& prev,
                                   LstmStepCache* cache = nullptr) {
    check_dims(p, x, prev);
    const Vector a_i = p.w_ix * x + p.w_is * prev.s + p.b_i.col(0);
    const Vector a_f = p.w_fx * x + p.w_fs * prev.s + p.b_f.col(0);
    const Vector a_g = p.w_cx * x + p.w_cs * prev.s + p.b_c.col(0);
    const Vector i = sigmoid_array(a_i.array());
    const Vector f = sigmoid_array(a_f.array());
    const Vector g = a_g.array().tanh();
    const Vector c = f.array() * prev.c.array() + i.array() * g.array();
    const Vector a_o = p.w_ox * x + p.w_os * prev.s + p.w_oc * c + p.b_o.col(0);
    const Vector o = sigmoid_array(a_o.array());
    const Vector tanh_c = c.array().tanh();
    LSTMState out{(o.array() * tanh_c.array()).matrix(), c};
    if (cache) *cache = {i, f, g, o, c, prev.c, prev.s, tanh_c};
    return out;
}

// s_t = tanh(W_x x_t + W_s s_{t-1} + b)
inline Vector rnn_cell_forward(const Matrix& w_x, const Matrix& w_s, const Vector& b, const Vector& x,
                               const Vector& s_prev) {
    require(x.size() == w_x.cols(), "rnn_cell_forward: x_t has length ", x.size(), ", expected ", w_x.cols());
    require(s_prev.size() == w_s.cols(), "rnn_cell_forward: s_prev has length ", s_prev.size(), ", expected ",
            w_s.cols());
    require(w_x.rows() == w_s.rows() && b.size() == w_x.rows(), "rnn_cell_forward: inconsistent hidden size");
    return (w_x * x + w_s * s_prev + b).array().tanh();
}

// Runs the cell over all window rows (already most-recent-first) from the
// zero state and returns the final internal state.
inline Vector encode_sequence(const EncoderParams& encoder, const Matrix& window) {
    require(window.rows() >= 1, "encode_sequence: empty window");
    return std::visit(
        [&](const auto& enc) -> Vector {
            using E = std::remove_cv_t<std::remove_reference_t<decltype(enc)>>;
            if constexpr (std::is_same_v<E, LSTMCellParams>) {
                LSTMState state = LSTMState::zero(enc.hidden_size);
                for (Index t = 0; t < window.rows(); ++t)
                    state = lstm_cell_forward(enc, window.row(t).transpose(), state);
                return state.s;
            } else {
                Vector s = Vector::Zero(enc.hidden_size);
                for (Index t = 0; t < window.rows(); ++t)
                    s = rnn_cell_forward(enc.w_x, enc.w_s, enc.b.col(0), window.row(t).transpose(), s);
                return s;
            }
        },
        encoder);
}

// Inverted dropout: kept entries are scaled by 1/(1-rate) at train time so
// evaluation applies no rescaling.
struct DropoutMasks {
    std::vector<Matrix> masks;  // one per classifier layer input; empty = eval mode
};

inline DropoutMasks make_dropout_masks(const NetworkParams& p, Index batch, Rng& rng) {
    DropoutMasks m;
    Index in_dim = p.encoder_output_dim;
    for (std::size_t l = 0; l < p.classifier.size(); ++l) {
        const double rate = p.dropout_rates[l];
        Matrix mask = Matrix::Constant(in_dim, batch, 1.0);
        if (rate > 0.0) {
            const double scale = 1.0 / (1.0 - rate);
            for (Index c = 0; c < batch; ++c)
                for (Index r = 0; r < in_dim; ++r) mask(r, c) = rng.uniform() < rate ? 0.0 : scale;
        }
        m.masks.push_back(std::move(mask));
        in_dim = p.classifier[l].out_size();
    }
    return m;
}

inline Matrix apply_activation(const Activation& act, const Matrix& h) {
    switch (act.kind) {
        case Activation::Kind::LeakyRelu: return (h.array() > 0.0).select(h, act.slope * h);
        case Activation::Kind::Sigmoid: return sigmoid_array(h.array());
        case Activation::Kind::Identity: return h;
    }
    return h;
}

// Classifier head over a batch of encodings (columns). Masks present = train
// mode; eval mode applies no dropout and is deterministic.
inline Matrix classifier_forward(const NetworkParams& p, const Matrix& encodings, const DropoutMasks* masks) {
    require(encodings.rows() == p.encoder_output_dim, "classify: encoding length ", encodings.rows(), ", expected ",
            p.encoder_output_dim);
    Matrix z = encodings;
    for (std::size_t l = 0; l < p.classifier.size(); ++l) {
        if (masks) z = z.cwiseProduct(masks->masks[l]);
        const auto& layer = p.classifier[l];
        Matrix h = layer.w * z;
        h.colwise() += layer.b.col(0);
        z = apply_activation(layer.activation, h);
    }
    return z;  // 1 x batch of probabilities in (0,1)
}

enum class ClassifyMode { Eval, Train };

// Crash probability for one encoding. Train mode draws fresh dropout masks
// from the rng; eval mode is a pure function of (params, encoding).
inline double classify(const NetworkParams& p, const Vector& encoding, ClassifyMode mode, Rng* rng = nullptr) {
    if (mode == ClassifyMode::Train) {
        require(rng != nullptr, "classify: train mode needs an rng");
        const DropoutMasks masks = make_dropout_masks(p, 1, *rng);
        return classifier_forward(p, encoding, &masks)(0, 0);
    }
    return classifier_forward(p, encoding, nullptr)(0, 0);
}

constexpr double kProbClamp = 1e-7;

inline double clamp_probability(double p) { return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp); }

// L = -(1/N) sum_i [w1 y_i log(yhat_i) + w2 (1-y_i) log(1-yhat_i)], with
// yhat clamped to [1e-7, 1-1e-7] before the logs.
inline double weighted_bce(const std::vector<int>& y, const std::vector<double>& yhat, double w1, double w2) {
    require(!y.empty(), "weighted_bce: empty batch");
    require(y.size() == yhat.size(), "weighted_bce: label/prediction size mismatch");
    require(w1 > 0.0 && w2 > 0.0, "weighted_bce: class weights must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        require(y[i] == 0 || y[i] == 1, "weighted_bce: labels must be 0 or 1");
        const double p = clamp_probability(yhat[i]);
        total += y[i] == 1 ? w1 * std::log(p) : w2 * std::log(1.0 - p);
    }
    return -total / static_cast<double>(y.size());
}

}  // namespace accdet
