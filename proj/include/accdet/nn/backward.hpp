#pragma once
// Batched training forward pass and exact analytic backpropagation through
// time, including the output-gate path through W_oc c_t (c_t feeds o_t at
// the same timestep, so dc_t collects three terms: the s_t tanh path, the
// W_oc^T route through the output pre-activation, and f_{t+1} from the next
// step).
#include <vector>

#include "accdet/data/types.hpp"
#include "accdet/nn/forward.hpp"
#include "accdet/nn/params.hpp"

namespace accdet {

// Columns are batch items; x_t[t] is the input frame fed at step t (window
// storage order, i.e. most recent first).
struct TrainingBatch {
    std::vector<Matrix> x_t;  // TSL matrices, input_size x B
    std::vector<int> y;

    Index size() const { return x_t.empty() ? 0 : x_t.front().cols(); }
    Index steps() const { return static_cast<Index>(x_t.size()); }
};

inline TrainingBatch make_training_batch(const std::vector<WindowSample>& windows, const std::vector<Index>& which) {
    require(!which.empty(), "make_training_batch: empty batch");
    const Index tsl = windows[static_cast<std::size_t>(which[0])].values.rows();
    const Index cols = windows[static_cast<std::size_t>(which[0])].values.cols();
    TrainingBatch batch;
    batch.x_t.assign(static_cast<std::size_t>(tsl), Matrix(cols, static_cast<Index>(which.size())));
    for (std::size_t b = 0; b < which.size(); ++b) {
        const auto& w = windows[static_cast<std::size_t>(which[b])];
        require(w.values.rows() == tsl && w.values.cols() == cols, "make_training_batch: inconsistent window shapes");
        for (Index t = 0; t < tsl; ++t) batch.x_t[static_cast<std::size_t>(t)].col(static_cast<Index>(b)) = w.values.row(t).transpose();
        batch.y.push_back(w.label);
    }
    return batch;
}

namespace detail {

struct LstmLayerCache {
    std::vector<Matrix> i, f, g, o, c, tanh_c, s_prev, c_prev;
};

struct RnnLayerCache {
    std::vector<Matrix> s, s_prev;  // s[t] = state after step t
};

struct ClassifierCache {
    std::vector<Matrix> z_in;   // layer input after dropout
    std::vector<Matrix> h;      // pre-activation
    std::vector<Matrix> y_out;  // post-activation
};

inline Matrix lstm_forward_batch(const LSTMCellParams& p, const TrainingBatch& batch, LstmLayerCache* cache) {
    const Index b_count = batch.size();
    Matrix s = Matrix::Zero(p.hidden_size, b_count);
    Matrix c = Matrix::Zero(p.hidden_size, b_count);
    for (Index t = 0; t < batch.steps(); ++t) {
        const Matrix& x = batch.x_t[static_cast<std::size_t>(t)];
        require(x.rows() == p.input_size, "lstm forward: frame has ", x.rows(), " features, expected ", p.input_size);
        Matrix a_i = p.w_ix * x + p.w_is * s;
        a_i.colwise() += p.b_i.col(0);
        Matrix a_f = p.w_fx * x + p.w_fs * s;
        a_f.colwise() += p.b_f.col(0);
        Matrix a_g = p.w_cx * x + p.w_cs * s;
        a_g.colwise() += p.b_c.col(0);
        const Matrix i = sigmoid_array(a_i.array());
        const Matrix f = sigmoid_array(a_f.array());
        const Matrix g = a_g.array().tanh();
        const Matrix c_next = (f.array() * c.array() + i.array() * g.array()).matrix();
        Matrix a_o = p.w_ox * x + p.w_os * s + p.w_oc * c_next;
        a_o.colwise() += p.b_o.col(0);
        const Matrix o = sigmoid_array(a_o.array());
        const Matrix tanh_c = c_next.array().tanh();
        if (cache) {
            cache->i.push_back(i);
            cache->f.push_back(f);
            cache->g.push_back(g);
            cache->o.push_back(o);
            cache->c.push_back(c_next);
            cache->tanh_c.push_back(tanh_c);
            cache->s_prev.push_back(s);
            cache->c_prev.push_back(c);
        }
        c = c_next;
        s = (o.array() * tanh_c.array()).matrix();
    }
    return s;
}

inline void lstm_backward_batch(const LSTMCellParams& p, const TrainingBatch& batch, const LstmLayerCache& cache,
                                const Matrix& d_encoding, LSTMCellParams& grad) {
    Matrix ds = d_encoding;
    Matrix dc_future = Matrix::Zero(ds.rows(), ds.cols());
    for (Index t = batch.steps() - 1; t >= 0; --t) {
        const std::size_t ti = static_cast<std::size_t>(t);
        const Matrix& x = batch.x_t[ti];
        const Matrix& i = cache.i[ti];
        const Matrix& f = cache.f[ti];
        const Matrix& g = cache.g[ti];
        const Matrix& o = cache.o[ti];
        const Matrix& c = cache.c[ti];
        const Matrix& tanh_c = cache.tanh_c[ti];
        const Matrix& s_prev = cache.s_prev[ti];
        const Matrix& c_prev = cache.c_prev[ti];

        const Matrix d_o = (ds.array() * tanh_c.array()).matrix();
        const Matrix d_ao = (d_o.array() * o.array() * (1.0 - o.array())).matrix();
        const Matrix dc = (ds.array() * o.array() * (1.0 - tanh_c.array().square())).matrix() +
                          p.w_oc.transpose() * d_ao + dc_future;

        const Matrix d_ai = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
        const Matrix d_af = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
        const Matrix d_ag = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();

        grad.w_ix.noalias() += d_ai * x.transpose();
        grad.w_fx.noalias() += d_af * x.transpose();
        grad.w_cx.noalias() += d_ag * x.transpose();
        grad.w_ox.noalias() += d_ao * x.transpose();
        grad.w_is.noalias() += d_ai * s_prev.transpose();
        grad.w_fs.noalias() += d_af * s_prev.transpose();
        grad.w_cs.noalias() += d_ag * s_prev.transpose();
        grad.w_os.noalias() += d_ao * s_prev.transpose();
        grad.w_oc.noalias() += d_ao * c.transpose();
        grad.b_i += d_ai.rowwise().sum();
        grad.b_f += d_af.rowwise().sum();
        grad.b_c += d_ag.rowwise().sum();
        grad.b_o += d_ao.rowwise().sum();

        ds = p.w_is.transpose() * d_ai + p.w_fs.transpose() * d_af + p.w_cs.transpose() * d_ag +
             p.w_os.transpose() * d_ao;
        dc_future = (dc.array() * f.array()).matrix();
    }
}

inline Matrix rnn_forward_batch(const RnnCellParams& p, const TrainingBatch& batch, RnnLayerCache* cache) {
    Matrix s = Matrix::Zero(p.hidden_size, batch.size());
    for (Index t = 0; t < batch.steps(); ++t) {
        const Matrix& x = batch.x_t[static_cast<std::size_t>(t)];
        require(x.rows() == p.input_size, "rnn forward: frame has ", x.rows(), " features, expected ", p.input_size);
        Matrix a = p.w_x * x + p.w_s * s;
        a.colwise() += p.b.col(0);
        Matrix s_next = a.array().tanh();
        if (cache) {
            cache->s_prev.push_back(s);
            cache->s.push_back(s_next);
        }
        s = std::move(s_next);
    }
    return s;
}

inline void rnn_backward_batch(const RnnCellParams& p, const TrainingBatch& batch, const RnnLayerCache& cache,
                               const Matrix& d_encoding, RnnCellParams& grad) {
    Matrix ds = d_encoding;
    for (Index t = batch.steps() - 1; t >= 0; --t) {
        const std::size_t ti = static_cast<std::size_t>(t);
        const Matrix d_a = (ds.array() * (1.0 - cache.s[ti].array().square())).matrix();
        grad.w_x.noalias() += d_a * batch.x_t[ti].transpose();
        grad.w_s.noalias() += d_a * cache.s_prev[ti].transpose();
        grad.b += d_a.rowwise().sum();
        ds = p.w_s.transpose() * d_a;
    }
}

inline Matrix classifier_forward_cached(const NetworkParams& p, const Matrix& encodings, const DropoutMasks* masks,
                                        ClassifierCache& cache) {
    Matrix z = encodings;
    for (std::size_t l = 0; l < p.classifier.size(); ++l) {
        if (masks) z = z.cwiseProduct(masks->masks[l]);
        cache.z_in.push_back(z);
        const auto& layer = p.classifier[l];
        Matrix h = layer.w * z;
        h.colwise() += layer.b.col(0);
        cache.h.push_back(h);
        z = apply_activation(layer.activation, h);
        cache.y_out.push_back(z);
    }
    return z;
}

inline Matrix activation_grad(const Activation& act, const Matrix& h, const Matrix& y, const Matrix& dy) {
    switch (act.kind) {
        case Activation::Kind::LeakyRelu:
            return (h.array() > 0.0).select(dy, act.slope * dy);
        case Activation::Kind::Sigmoid:
            return (dy.array() * y.array() * (1.0 - y.array())).matrix();
        case Activation::Kind::Identity:
            return dy;
    }
    return dy;
}

}  // namespace detail

struct BackwardResult {
    double loss = 0.0;
    GradientSet grads;
    std::vector<double> probabilities;  // raw sigmoid outputs per batch item
};

// Loss value for a fixed set of dropout masks (nullptr = no dropout). The
// finite-difference oracle in the tests drives this directly.
inline double network_loss(const NetworkParams& p, const TrainingBatch& batch, double w1, double w2,
                           const DropoutMasks* masks = nullptr) {
    Matrix encodings = std::visit(
        [&](const auto& enc) -> Matrix {
            using E = std::remove_cv_t<std::remove_reference_t<decltype(enc)>>;
            if constexpr (std::is_same_v<E, LSTMCellParams>)
                return detail::lstm_forward_batch(enc, batch, nullptr);
            else
                return detail::rnn_forward_batch(enc, batch, nullptr);
        },
        p.encoder);
    const Matrix yhat = classifier_forward(p, encodings, masks);
    std::vector<double> probs(static_cast<std::size_t>(yhat.cols()));
    for (Index b = 0; b < yhat.cols(); ++b) probs[static_cast<std::size_t>(b)] = yhat(0, b);
    return weighted_bce(batch.y, probs, w1, w2);
}

// Mean weighted-BCE loss over the batch plus gradients for every parameter
// tensor. Masks, when supplied, must match the batch width.
inline BackwardResult network_backward(const NetworkParams& p, const TrainingBatch& batch, double w1, double w2,
                                       const DropoutMasks* masks = nullptr) {
    require(batch.size() > 0, "network_backward: empty batch");
    require(w1 > 0.0 && w2 > 0.0, "network_backward: class weights must be positive");
    const Index b_count = batch.size();
    const double inv_n = 1.0 / static_cast<double>(b_count);

    BackwardResult out;
    out.grads = zeros_like(p);

    detail::LstmLayerCache lstm_cache;
    detail::RnnLayerCache rnn_cache;
    const bool is_lstm = p.encoder_kind() == EncoderKind::Lstm;
    Matrix encodings = is_lstm
                           ? detail::lstm_forward_batch(std::get<LSTMCellParams>(p.encoder), batch, &lstm_cache)
                           : detail::rnn_forward_batch(std::get<RnnCellParams>(p.encoder), batch, &rnn_cache);

    detail::ClassifierCache cls_cache;
    const Matrix yhat = detail::classifier_forward_cached(p, encodings, masks, cls_cache);

    // Loss and dL/dyhat with the clamp: a clamped probability contributes a
    // constant to the loss, so its gradient is zero.
    Matrix d_yhat = Matrix::Zero(1, b_count);
    double total = 0.0;
    for (Index b = 0; b < b_count; ++b) {
        const double raw = yhat(0, b);
        const double pc = clamp_probability(raw);
        const int y = batch.y[static_cast<std::size_t>(b)];
        const double term = y == 1 ? -w1 * std::log(pc) : -w2 * std::log(1.0 - pc);
        require(std::isfinite(term), "network_backward: non-finite loss at batch index ", b);
        total += term;
        out.probabilities.push_back(raw);
        if (raw > kProbClamp && raw < 1.0 - kProbClamp)
            d_yhat(0, b) = inv_n * (y == 1 ? -w1 / pc : w2 / (1.0 - pc));
    }
    out.loss = total * inv_n;

    // Classifier backward.
    Matrix dy = d_yhat;
    Matrix d_encodings;
    for (std::size_t l = p.classifier.size(); l-- > 0;) {
        const auto& layer = p.classifier[l];
        const Matrix dh = detail::activation_grad(layer.activation, cls_cache.h[l], cls_cache.y_out[l], dy);
        auto& grad_layer = out.grads.classifier[l];
        grad_layer.w.noalias() += dh * cls_cache.z_in[l].transpose();
        grad_layer.b += dh.rowwise().sum();
        Matrix dz = layer.w.transpose() * dh;
        if (masks) dz = dz.cwiseProduct(masks->masks[l]);
        if (l == 0)
            d_encodings = std::move(dz);
        else
            dy = std::move(dz);
    }

    if (is_lstm)
        detail::lstm_backward_batch(std::get<LSTMCellParams>(p.encoder), batch, lstm_cache, d_encodings,
                                    std::get<LSTMCellParams>(out.grads.encoder));
    else
        detail::rnn_backward_batch(std::get<RnnCellParams>(p.encoder), batch, rnn_cache, d_encodings,
                                   std::get<RnnCellParams>(out.grads.encoder));
    return out;
}

}  // namespace accdet
