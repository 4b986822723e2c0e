#pragma once

#include <stdexcept>

namespace confaudit {

// Base type for all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or violated operation contract.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Input vectors disagree in length.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A column that must vary is constant; the message names the column.
class DegenerateColumnError : public Error {
 public:
  using Error::Error;
};

// The confounder has zero sample variance.
class DegenerateConfounderError : public Error {
 public:
  using Error::Error;
};

// A correlation of magnitude one makes a partial statistic undefined.
class CollinearityError : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

class EmptyResultError : public Error {
 public:
  using Error::Error;
};

class UndefinedAucError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace confaudit
