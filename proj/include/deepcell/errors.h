#ifndef DEEPCELL_ERRORS_H_
#define DEEPCELL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace deepcell {

// Bad arguments or malformed input data.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorization failures, non-finite losses and similar numeric breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepcell

#endif  // DEEPCELL_ERRORS_H_
