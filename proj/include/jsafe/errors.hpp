#ifndef JSAFE_ERRORS_HPP
#define JSAFE_ERRORS_HPP

#include <stdexcept>

namespace jsafe {

/// A caller broke a documented precondition (bad shape, bad action index).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace jsafe

#endif  // JSAFE_ERRORS_HPP
