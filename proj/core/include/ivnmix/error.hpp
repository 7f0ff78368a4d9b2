#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ivnmix {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network structure and parameters.
class CycleDetected : public Error {
 public:
  using Error::Error;
};

class RowSumViolation : public Error {
 public:
  RowSumViolation(std::string node, std::size_t row, double sum);
  const std::string& node() const { return node_; }
  std::size_t row() const { return row_; }

 private:
  std::string node_;
  std::size_t row_;
};

class ArityMismatch : public Error {
 public:
  using Error::Error;
};

class DanglingParent : public Error {
 public:
  using Error::Error;
};

class PartialAssignment : public Error {
 public:
  using Error::Error;
};

// Input formats.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& expected, const std::string& found);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UndeclaredVariable : public Error {
 public:
  using Error::Error;
};

class TableShapeMismatch : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& what);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class RangeError : public Error {
 public:
  RangeError(const std::string& field, const std::string& what);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Interventions, marginals and mixtures.
class InvalidIntervention : public Error {
 public:
  using Error::Error;
};

class EmptySampleSet : public Error {
 public:
  using Error::Error;
};

class MissingComponent : public Error {
 public:
  using Error::Error;
};

class MissingMarginal : public Error {
 public:
  using Error::Error;
};

class NegativeProportion : public Error {
 public:
  using Error::Error;
};

class SumNotOne : public Error {
 public:
  using Error::Error;
};

class TooManyInterventions : public Error {
 public:
  using Error::Error;
};

// Recovery.
class DegeneratePivot : public Error {
 public:
  using Error::Error;
};

class NoNonnegativeCandidate : public Error {
 public:
  using Error::Error;
};

class AmbiguousCandidates : public Error {
 public:
  using Error::Error;
};

class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

class Diverged : public Error {
 public:
  using Error::Error;
};

class ZeroDenominator : public Error {
 public:
  explicit ZeroDenominator(std::size_t sample);
  std::size_t sample() const { return sample_; }

 private:
  std::size_t sample_;
};

}  // namespace ivnmix
