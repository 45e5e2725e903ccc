#pragma once

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace mimovb {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimMismatch : Error {
  using Error::Error;
};
struct NotHermitian : Error {
  using Error::Error;
};
struct NotPsd : Error {
  using Error::Error;
};
struct Singular : Error {
  using Error::Error;
};
struct BadAlpha : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DegenerateChannel : Error {
  using Error::Error;
};
struct DegenerateTruth : Error {
  using Error::Error;
};

}  // namespace mimovb
