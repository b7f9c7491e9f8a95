#pragma once

#include <stdexcept>
#include <string>

namespace abr5g {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedTrace : Error {
  using Error::Error;
};
struct DeadTrace : Error {
  using Error::Error;
};
struct InvalidInterval : Error {
  using Error::Error;
};
struct InvalidSpec : Error {
  using Error::Error;
};
struct InvalidRung : Error {
  using Error::Error;
};
struct EmptyRecord : Error {
  using Error::Error;
};
struct DegenerateReference : Error {
  using Error::Error;
};
struct SessionComplete : Error {
  using Error::Error;
};
struct PolicyFault : Error {
  using Error::Error;
};
struct NumericalFault : Error {
  using Error::Error;
};
struct NoData : Error {
  using Error::Error;
};

}  // namespace abr5g
