#include "tvae/gradcheck.hpp"

#include <stdexcept>

namespace tvae {

std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("finite_diff_gradient: eps must be > 0");
  }
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = point[i];
    point[i] = xi + eps;
    const double up = f(point);
    point[i] = xi - eps;
    const double down = f(point);
    point[i] = xi;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace tvae
