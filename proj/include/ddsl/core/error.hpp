#pragma once

#include <stdexcept>
#include <string>

namespace ddsl {

/// Failure class, used by the CLI to pick an exit code.
enum class ErrorClass {
  data,      // malformed or inconsistent inputs
  numerical  // a fit or solve failed to produce a usable answer
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

#define DDSL_DEFINE_ERROR(Name, Class)                                       \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {} \
  };

DDSL_DEFINE_ERROR(GridError, data)
DDSL_DEFINE_ERROR(FormatError, data)
DDSL_DEFINE_ERROR(ParamError, data)
DDSL_DEFINE_ERROR(ProjectionError, data)
DDSL_DEFINE_ERROR(RigError, data)
DDSL_DEFINE_ERROR(EvalError, data)
DDSL_DEFINE_ERROR(IoError, data)
DDSL_DEFINE_ERROR(FitError, numerical)
DDSL_DEFINE_ERROR(DivisionError, numerical)
DDSL_DEFINE_ERROR(OptimError, numerical)
DDSL_DEFINE_ERROR(SolverError, numerical)

#undef DDSL_DEFINE_ERROR

}  // namespace ddsl
