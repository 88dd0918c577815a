#pragma once

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dorsal {

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

using Points3d = Points3<double>;
using Points2d = Points2<double>;
using FaceIndices = Eigen::Matrix<int, Eigen::Dynamic, 3>;

// Every recoverable failure in the library is reported as one of these.
// `what()` always names the violated condition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Warnings go through a process-wide sink (stderr by default). The sink is
// guarded by a mutex so concurrent frame workers may warn freely.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace dorsal
