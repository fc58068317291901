#pragma once

#include <functional>
#include <span>
#include <vector>

namespace cbrnn {

/// Central finite differences of `loss` with respect to every entry of
/// `params` (perturbed in place and restored).
std::vector<double> numeric_gradient(const std::function<double()>& loss, std::span<double> params,
                                     double step = 1e-5);

/// ||a - b|| / max(||a|| + ||b||, tiny). Zero when both vectors vanish.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

}  // namespace cbrnn
