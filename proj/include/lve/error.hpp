#ifndef LVE_ERROR_HPP
#define LVE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lve {

/// Root of every exception thrown by the library. The CLI maps the three
/// families below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed caller input: bad symbols, wrong shapes, wrong dimensions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or model-file problems.
class IoError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf escaping from training, inference or an objective.
class NumericError : public Error {
 public:
  using Error::Error;
};

class UnknownSymbol : public InputError {
 public:
  UnknownSymbol(char symbol, int row, int col)
      : InputError("unknown tile symbol '" + std::string(1, symbol) + "' at row " +
                   std::to_string(row) + ", col " + std::to_string(col)),
        symbol(symbol), row(row), col(col) {}
  char symbol;
  int row;
  int col;
};

class RaggedRows : public InputError {
 public:
  explicit RaggedRows(int row)
      : InputError("row " + std::to_string(row) + " differs in length from row 0"), row(row) {}
  int row;
};

class TooNarrow : public InputError {
 public:
  TooNarrow(int width, int needed)
      : InputError("level width " + std::to_string(width) + " is narrower than window width " +
                   std::to_string(needed)) {}
};

class ShapeMismatch : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateBatch : public InputError {
 public:
  explicit DegenerateBatch(int batch)
      : InputError("batchnorm in train mode needs batch >= 2, got " + std::to_string(batch)) {}
};

class EmptyDataset : public InputError {
 public:
  EmptyDataset() : InputError("training dataset is empty") {}
};

class EmptyPlan : public InputError {
 public:
  EmptyPlan() : InputError("segment plan is empty") {}
};

class NonFiniteInput : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteLoss : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteFitness : public NumericError {
 public:
  using NumericError::NumericError;
};

class CovarianceDecompositionFailure : public NumericError {
 public:
  using NumericError::NumericError;
};

class FormatVersionMismatch : public IoError {
 public:
  using IoError::IoError;
};

class ChecksumMismatch : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace lve

#endif  // LVE_ERROR_HPP
