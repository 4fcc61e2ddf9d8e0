#pragma once

#include <functional>

#include "tpcflow/param_vector.hpp"

namespace tpcflow {

/// A scalar loss with its exact reverse-mode gradient. The batch (and any
/// frozen randomness such as a gate draw) is bound into the closures at
/// construction, so evaluation depends on the parameters alone and repeated
/// calls are bit-identical.
struct DifferentiableProgram {
    std::function<double(const ParamVector&)> forward;
    std::function<ParamVector(const ParamVector&)> gradient;
};

/// Max over coordinates of |analytic - central difference| / max(|analytic|, 1e-8).
/// step > 0 is the central-difference half-width.
double finite_diff_check(const DifferentiableProgram& prog, const ParamVector& params, double step);

/// Same check restricted to one named segment (cheaper probe for large nets).
double finite_diff_check_segment(const DifferentiableProgram& prog, const ParamVector& params,
                                 const std::string& segment, double step);

}  // namespace tpcflow
