#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace symml {

// Base of every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SYMML_DEFINE_ERROR(Name)                     \
    class Name : public Error {                      \
    public:                                          \
        explicit Name(const std::string& what)       \
            : Error(std::string(#Name ": ") + what)  \
        {}                                           \
    }

SYMML_DEFINE_ERROR(ShapeMismatch);
SYMML_DEFINE_ERROR(BadFactor);
SYMML_DEFINE_ERROR(EmptyBatch);
SYMML_DEFINE_ERROR(EmptyDataset);
SYMML_DEFINE_ERROR(GraphCycle);
SYMML_DEFINE_ERROR(WindowLengthMismatch);
SYMML_DEFINE_ERROR(TooShort);
SYMML_DEFINE_ERROR(DivergedTraining);
SYMML_DEFINE_ERROR(LengthMismatch);
SYMML_DEFINE_ERROR(ZeroEnergy);
SYMML_DEFINE_ERROR(DegenerateR);
SYMML_DEFINE_ERROR(RejectionExhausted);
SYMML_DEFINE_ERROR(FormatVersionMismatch);
SYMML_DEFINE_ERROR(CorruptRecord);
SYMML_DEFINE_ERROR(InvalidArgument);

#undef SYMML_DEFINE_ERROR

// Raised when a state becomes non-finite or leaves the escape radius.
class IntegrationDiverged : public Error {
public:
    IntegrationDiverged(std::size_t step, const std::string& what)
        : Error("IntegrationDiverged at step " + std::to_string(step) + ": " + what),
          step_(step)
    {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace symml
