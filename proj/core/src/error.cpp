#include "ivnmix/error.hpp"

namespace ivnmix {

RowSumViolation::RowSumViolation(std::string node, std::size_t row, double sum)
    : Error("probability row " + std::to_string(row) + " of node '" + node + "' sums to " +
            std::to_string(sum)),
      node_(std::move(node)),
      row_(row) {}

SyntaxError::SyntaxError(std::size_t line, const std::string& expected, const std::string& found)
    : Error("line " + std::to_string(line) + ": expected " + expected + ", found '" + found + "'"),
      line_(line) {}

SchemaError::SchemaError(const std::string& path, const std::string& what)
    : Error("schema error at " + path + ": " + what), path_(path) {}

RangeError::RangeError(const std::string& field, const std::string& what)
    : Error("field '" + field + "' out of range: " + what), field_(field) {}

ZeroDenominator::ZeroDenominator(std::size_t sample)
    : Error("sample " + std::to_string(sample) + " has zero probability under every weighted component"),
      sample_(sample) {}

}  // namespace ivnmix
