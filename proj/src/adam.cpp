#include "tpcflow/adam.hpp"

#include <cmath>

#include "tpcflow/errors.hpp"

namespace tpcflow {

Adam::Adam(const ParamVector& params_layout, double lr, double beta1, double beta2, double eps)
    : m_(params_layout.zeros_like()),
      v_(params_layout.zeros_like()),
      lr_(params_layout.size(), lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
    if (!(lr > 0.0)) throw ConfigError("Adam: lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam: betas must lie in [0,1)");
    }
}

void Adam::set_segment_lr(const std::string& segment, double lr) {
    if (!(lr > 0.0)) throw ConfigError("Adam: lr must be > 0");
    const auto& seg = m_.segment(segment);
    for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) lr_[i] = lr;
}

void Adam::step(ParamVector& params, const ParamVector& grad) {
    if (!params.same_layout(m_)) throw ConfigError("Adam: params layout mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        params[i] -= lr_[i] * m_hat / (std::sqrt(v_hat) + eps_);
    }
}

}  // namespace tpcflow
