#include "tpcflow/program.hpp"

#include <algorithm>
#include <cmath>

#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

double check_range(const DifferentiableProgram& prog, const ParamVector& params, std::size_t lo,
                   std::size_t hi, double step) {
    if (step <= 0.0) throw ConfigError("finite_diff_check: step must be > 0");
    const ParamVector analytic = prog.gradient(params);
    ParamVector probe = params;
    double worst = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double up = prog.forward(probe);
        probe[i] = saved - step;
        const double down = prog.forward(probe);
        probe[i] = saved;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max(std::abs(analytic[i]), 1e-8);
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

}  // namespace

double finite_diff_check(const DifferentiableProgram& prog, const ParamVector& params, double step) {
    return check_range(prog, params, 0, params.size(), step);
}

double finite_diff_check_segment(const DifferentiableProgram& prog, const ParamVector& params,
                                 const std::string& segment, double step) {
    const auto& seg = params.segment(segment);
    return check_range(prog, params, seg.offset, seg.offset + seg.length, step);
}

}  // namespace tpcflow
