#pragma once
// SGD with momentum and ADAM, over the uniform tensor visitation order.
//   SGD:  v <- mu v - lr g;            p <- p + v
//   ADAM: m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
//         p <- p - lr m^ / (sqrt(v^) + eps)   with bias-corrected m^, v^.
#include <cmath>
#include <string>
#include <vector>

#include "accdet/nn/params.hpp"

namespace accdet {

enum class OptimizerKind { SgdMomentum, Adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::SgdMomentum ? "sgd" : "adam"; }

inline OptimizerKind optimizer_kind_from_string(std::string_view s) {
    if (s == "sgd") return OptimizerKind::SgdMomentum;
    if (s == "adam") return OptimizerKind::Adam;
    fail("unknown optimizer '", s, "'");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SgdMomentum;
    double lr = 1e-5;
    double momentum = 0.8;   // SGD
    double beta1 = 0.9;      // ADAM
    double beta2 = 0.999;    // ADAM
    double epsilon = 1e-8;   // ADAM

    void validate() const {
        require(lr > 0.0, "optimizer: learning rate must be positive");
        require(momentum >= 0.0 && momentum < 1.0, "optimizer: momentum must be in [0,1)");
        require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, "optimizer: betas must be in (0,1)");
        require(epsilon > 0.0, "optimizer: epsilon must be positive");
    }
};

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    const OptimizerConfig& config() const { return cfg_; }
    long step_count() const { return step_; }

    void step(NetworkParams& params, const GradientSet& grads) {
        std::vector<const Matrix*> grad_tensors;
        visit_tensors(const_cast<GradientSet&>(grads),
                      [&](const std::string&, Matrix& m, Index) { grad_tensors.push_back(&m); });
        ++step_;
        std::size_t i = 0;
        visit_tensors(params, [&](const std::string& name, Matrix& p, Index) {
            const Matrix& g = *grad_tensors[i];
            require(g.rows() == p.rows() && g.cols() == p.cols(), "optimizer: gradient shape mismatch for ", name);
            if (cfg_.kind == OptimizerKind::SgdMomentum) {
                if (velocity_.size() <= i) velocity_.push_back(Matrix::Zero(p.rows(), p.cols()));
                Matrix& v = velocity_[i];
                v = cfg_.momentum * v - cfg_.lr * g;
                p += v;
            } else {
                if (m_.size() <= i) {
                    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
                    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
                }
                Matrix& m = m_[i];
                Matrix& v = v_[i];
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
                v = (cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
                const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
                const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
                p.array() -= cfg_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.epsilon);
            }
            ++i;
        });
    }

private:
    OptimizerConfig cfg_;
    long step_ = 0;
    std::vector<Matrix> velocity_;  // SGD
    std::vector<Matrix> m_, v_;     // ADAM moments
};

}  // namespace accdet
