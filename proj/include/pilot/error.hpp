#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace pilot {

enum class ErrorKind {
  kUnknownLabel,
  kIncomparable,
  kSyntax,
  kValidation,
  kUnregisteredSymbol,
  kNotEnabled,
  kBudgetExceeded,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnknownLabel: return "unknown-label";
    case ErrorKind::kIncomparable: return "incomparable";
    case ErrorKind::kSyntax: return "syntax";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kUnregisteredSymbol: return "unregistered-symbol";
    case ErrorKind::kNotEnabled: return "not-enabled";
    case ErrorKind::kBudgetExceeded: return "budget-exceeded";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// Base of every domain error thrown by the library. `violation()` is a stable
// machine-readable name (used verbatim in HTTP error bodies).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string violation, const std::string& message)
      : std::runtime_error(message), kind_(kind), violation_(std::move(violation)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& violation() const noexcept { return violation_; }

 private:
  ErrorKind kind_;
  std::string violation_;
};

struct SourceSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t line = 1;
  std::size_t column = 1;

  bool operator==(const SourceSpan&) const = default;
};

class UnknownLabelError : public Error {
 public:
  UnknownLabelError(const std::string& domain, const std::string& label,
                    std::optional<SourceSpan> span = std::nullopt)
      : Error(ErrorKind::kUnknownLabel, "unknown-" + domain,
              (span ? std::to_string(span->line) + ":" + std::to_string(span->column) + ": " : std::string()) +
                  "unknown " + domain + " '" + label + "'"),
        domain_(domain),
        label_(label),
        span_(span) {}

  const std::string& domain() const noexcept { return domain_; }
  const std::string& label() const noexcept { return label_; }
  const std::optional<SourceSpan>& span() const noexcept { return span_; }

 private:
  std::string domain_;
  std::string label_;
  std::optional<SourceSpan> span_;
};

class IncomparableError : public Error {
 public:
  IncomparableError(const std::string& domain, const std::string& a, const std::string& b)
      : Error(ErrorKind::kIncomparable, "incomparable-" + domain,
              domain + " labels '" + a + "' and '" + b + "' are incomparable") {}
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, SourceSpan span)
      : Error(ErrorKind::kSyntax, "syntax",
              std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message),
        span_(span),
        message_(message) {}

  const SourceSpan& span() const noexcept { return span_; }
  // The message without the position prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  SourceSpan span_;
  std::string message_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string violation, const std::string& message)
      : Error(ErrorKind::kValidation, std::move(violation), message) {}
};

class UnregisteredSymbolError : public Error {
 public:
  explicit UnregisteredSymbolError(const std::string& symbol)
      : Error(ErrorKind::kUnregisteredSymbol, "unregistered-symbol",
              "no interpretation registered for '" + symbol + "'") {}
};

class NotEnabledError : public Error {
 public:
  explicit NotEnabledError(const std::string& event)
      : Error(ErrorKind::kNotEnabled, "not-enabled", "event is not enabled: " + event) {}
};

class BudgetExceededError : public Error {
 public:
  explicit BudgetExceededError(std::size_t budget)
      : Error(ErrorKind::kBudgetExceeded, "state-budget-exceeded",
              "state budget of " + std::to_string(budget) + " states exceeded") {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::kIo, "io", message) {}
};

}  // namespace pilot
