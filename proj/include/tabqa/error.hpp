#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabqa {

/// Base class of every error thrown by the library. `kind()` is a stable,
/// machine-readable tag used in CLI diagnostics and HTTP responses.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

class ParseError : public Error {
public:
  ParseError(std::size_t row, const std::string& what)
      : Error("ParseError", what), row_(row) {}
  /// 1-based data row (0 refers to the header).
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

#define TABQA_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what) : Error(#Name, what) {}             \
  }

TABQA_DEFINE_ERROR(EmptyInput);
TABQA_DEFINE_ERROR(InferError);
TABQA_DEFINE_ERROR(SchemaError);
TABQA_DEFINE_ERROR(InsufficientData);
TABQA_DEFINE_ERROR(TemplateError);
TABQA_DEFINE_ERROR(ProviderError);
TABQA_DEFINE_ERROR(ConditionError);
TABQA_DEFINE_ERROR(LengthError);
TABQA_DEFINE_ERROR(TrainError);
TABQA_DEFINE_ERROR(DecomposeError);
TABQA_DEFINE_ERROR(FrameError);
TABQA_DEFINE_ERROR(SearchError);
TABQA_DEFINE_ERROR(EmptyChartError);
TABQA_DEFINE_ERROR(PreconditionError);
TABQA_DEFINE_ERROR(DeadlineExceeded);

#undef TABQA_DEFINE_ERROR

/// No sub-question of a question could be answered; one reason per leaf.
class Unanswerable : public Error {
public:
  explicit Unanswerable(std::vector<std::string> reasons)
      : Error("Unanswerable", summarize(reasons)), reasons_(std::move(reasons)) {}
  const std::vector<std::string>& reasons() const noexcept { return reasons_; }

private:
  static std::string summarize(const std::vector<std::string>& r) {
    std::string out = "question is unanswerable";
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "; " : ": ") + r[i];
    return out;
  }
  std::vector<std::string> reasons_;
};

} // namespace tabqa
