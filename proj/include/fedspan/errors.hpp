#pragma once

#include <stdexcept>
#include <string>

namespace fedspan {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FEDSPAN_ERROR(Name)                 \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  };

FEDSPAN_ERROR(ParseError)
FEDSPAN_ERROR(CoverageError)
FEDSPAN_ERROR(RangeError)
FEDSPAN_ERROR(ArgumentError)
FEDSPAN_ERROR(ConsistencyError)
FEDSPAN_ERROR(SizeError)
FEDSPAN_ERROR(StructureError)
FEDSPAN_ERROR(InfeasibleError)
FEDSPAN_ERROR(CapacityError)
FEDSPAN_ERROR(DeadlineError)
FEDSPAN_ERROR(ConstraintError)
FEDSPAN_ERROR(DomainError)
FEDSPAN_ERROR(DegenerateError)
FEDSPAN_ERROR(PreconditionError)
FEDSPAN_ERROR(NonConvergenceError)
FEDSPAN_ERROR(ConfigError)

#undef FEDSPAN_ERROR

}  // namespace fedspan
