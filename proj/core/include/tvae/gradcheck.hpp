#pragma once

#include <functional>
#include <span>
#include <vector>

namespace tvae {

/// Central finite differences (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) per
/// coordinate. Used as the independent oracle for every analytic gradient in
/// the code base; it never touches the reverse-mode machinery.
std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double eps);

}  // namespace tvae
