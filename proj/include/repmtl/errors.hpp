#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace repmtl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  RankDeficient() : Error("rank deficient") {}
  explicit RankDeficient(const std::string& what) : Error("rank deficient: " + what) {}
};

class LossOverflow : public Error {
 public:
  LossOverflow() : Error("loss overflow") {}
};

/// An iterative solver ran out of iterations. Carries the last iterate so
/// callers can inspect how far it got.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, Eigen::VectorXd last_iterate, double grad_norm)
      : Error(what), last_iterate_(std::move(last_iterate)), grad_norm_(grad_norm) {}

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double grad_norm() const { return grad_norm_; }

 private:
  Eigen::VectorXd last_iterate_;
  double grad_norm_;
};

class NoRankDetected : public Error {
 public:
  NoRankDetected() : Error("no rank detected") {}
};

}  // namespace repmtl
