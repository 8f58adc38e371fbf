#pragma once

#include <stdexcept>
#include <string>

namespace scs {

// Every failure raised by the core derives from Error; the C API maps the
// concrete type onto a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class FatalConfig : public Error {
 public:
  using Error::Error;
};

class EmptyScene : public Error {
 public:
  using Error::Error;
};

class ObjectNotVisible : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scs
