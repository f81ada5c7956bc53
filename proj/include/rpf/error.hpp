#pragma once

#include <stdexcept>
#include <string>

namespace rpf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dimension arguments or mismatched vector/matrix sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be used: non-finite values, parse failures,
/// degenerate point sets.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Centered data matrix has rank below the requested latent dimension.
class RankDeficiencyError : public DataError {
 public:
  RankDeficiencyError(long achieved, long requested)
      : DataError("rank deficiency: centered data has rank " + std::to_string(achieved) +
                  ", need at least " + std::to_string(requested)),
        achieved_rank(achieved) {}

  long achieved_rank;
};

/// Model parameters violate an invariant (e.g. weights off the simplex).
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace rpf
