#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cfforge {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document. `where` is a line number or a JSON field path.
class ParseError : public Error {
 public:
  ParseError(std::string where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)), message_(what) {}
  const std::string& where() const noexcept { return where_; }
  /// The description without the location.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string where_;
  std::string message_;
};

class UnboundProposition : public Error {
 public:
  explicit UnboundProposition(const std::string& id)
      : Error("unbound proposition '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class UnknownRule : public Error {
 public:
  explicit UnknownRule(const std::string& id) : Error("unknown rule '" + id + "'") {}
};

class InconsistentState : public Error {
 public:
  using Error::Error;
};

class NoOutputClasses : public Error {
 public:
  NoOutputClasses() : Error("rule base declares no output classes") {}
};

class UnknownLabel : public Error {
 public:
  explicit UnknownLabel(const std::string& label)
      : Error("label '" + label + "' is not an output class") {}
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("training set is empty") {}
};

class NoTrainableRules : public Error {
 public:
  NoTrainableRules() : Error("no trainable rules") {}
};

class SpecInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace cfforge
