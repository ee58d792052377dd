#include "weatherformer/util/least_squares.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace wf::util {

LeastSquaresFit least_squares(std::span<const double> design, std::size_t rows, std::size_t cols,
                              std::span<const double> target, double ridge) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("least_squares: empty design");
  if (design.size() != rows * cols || target.size() != rows) {
    throw std::invalid_argument("least_squares: design and target sizes disagree");
  }
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMatrix> x(design.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const Eigen::Map<const Eigen::VectorXd> y(target.data(), static_cast<Eigen::Index>(rows));

  LeastSquaresFit fit;
  Eigen::VectorXd b;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() == static_cast<Eigen::Index>(cols)) {
    b = qr.solve(y);
  } else {
    const Eigen::MatrixXd normal = x.transpose() * x + ridge * Eigen::MatrixXd::Identity(x.cols(), x.cols());
    b = normal.ldlt().solve(x.transpose() * y);
    fit.used_ridge = true;
  }
  if (!b.allFinite()) throw std::runtime_error("least_squares: solution is not finite");
  fit.coefficients.assign(b.data(), b.data() + b.size());
  return fit;
}

}  // namespace wf::util
