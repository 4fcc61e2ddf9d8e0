#pragma once

#include "tpcflow/param_vector.hpp"

namespace tpcflow {

/// Adam with bias-corrected first and second moments:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// Moments share the parameter layout. A per-segment learning-rate override
/// lets the pairing parameters step at their own rate.
class Adam {
  public:
    Adam(const ParamVector& params_layout, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    /// Overrides the learning rate for every index inside the named segment.
    void set_segment_lr(const std::string& segment, double lr);

    /// One update of params in place. Steps the internal counter.
    void step(ParamVector& params, const ParamVector& grad);

    long steps_taken() const { return t_; }
    const ParamVector& first_moment() const { return m_; }
    const ParamVector& second_moment() const { return v_; }

  private:
    ParamVector m_;
    ParamVector v_;
    std::vector<double> lr_;  // per-coordinate
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace tpcflow
