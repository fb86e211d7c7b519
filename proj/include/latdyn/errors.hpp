#pragma once

#include <stdexcept>
#include <string>

namespace latdyn {

enum class ErrorKind {
  Config,       // invalid configuration or parameters
  Input,        // malformed or inconsistent input data
  Shape,        // operand dimensions do not match
  Numerical,    // divergence, NaN, failed solve
  Geometry,     // degenerate collision geometry
  Contract,     // API misuse (e.g. backward on a consumed graph)
  Correlation,  // correlation undefined for zero-variance input
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LATDYN_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

LATDYN_DEFINE_ERROR(ConfigError, Config)
LATDYN_DEFINE_ERROR(InputError, Input)
LATDYN_DEFINE_ERROR(ShapeError, Shape)
LATDYN_DEFINE_ERROR(NumericalError, Numerical)
LATDYN_DEFINE_ERROR(DegenerateGeometryError, Geometry)
LATDYN_DEFINE_ERROR(ContractError, Contract)
LATDYN_DEFINE_ERROR(UndefinedCorrelationError, Correlation)

#undef LATDYN_DEFINE_ERROR

}  // namespace latdyn
