#include "mcn/linear_map.hpp"

#include <sstream>
#include <stdexcept>

namespace mcn {

LinearMap::LinearMap(Matrix w, Vector b) : weights(std::move(w)), bias(std::move(b)) {
  if (bias.size() != weights.rows()) {
    std::ostringstream os;
    os << "LinearMap: bias length " << bias.size() << " does not match row count "
       << weights.rows();
    throw std::invalid_argument(os.str());
  }
}

LinearMap::LinearMap(Matrix w) : weights(std::move(w)) {
  bias = Vector::Zero(weights.rows());
}

LinearMap LinearMap::Zero(Eigen::Index rows, Eigen::Index cols) {
  return LinearMap(Matrix::Zero(rows, cols));
}

LinearMap LinearMap::Identity(Eigen::Index n) {
  return LinearMap(Matrix::Identity(n, n));
}

Vector LinearMap::apply(const Vector& x) const {
  if (x.size() != cols()) {
    std::ostringstream os;
    os << "LinearMap::apply: input length " << x.size() << " does not match column count "
       << cols();
    throw std::invalid_argument(os.str());
  }
  return weights * x + bias;
}

Matrix LinearMap::applyBatch(const Matrix& X) const {
  if (X.rows() != cols()) {
    std::ostringstream os;
    os << "LinearMap::applyBatch: input row count " << X.rows()
       << " does not match column count " << cols();
    throw std::invalid_argument(os.str());
  }
  return (weights * X).colwise() + bias;
}

double LinearMap::inducedL1Norm() const {
  if (weights.rows() == 0 || weights.cols() == 0) return 0.0;
  return weights.cwiseAbs().colwise().sum().maxCoeff();
}

bool LinearMap::allFinite() const { return weights.allFinite() && bias.allFinite(); }

long LinearMap::nonzeroCount() const {
  long n = (weights.array() != 0.0).count();
  n += (bias.array() != 0.0).count();
  return n;
}

}  // namespace mcn
