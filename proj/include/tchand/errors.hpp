#pragma once

#include <stdexcept>
#include <string>

namespace tchand {

// Base error carrying a stable machine-readable kind tag. The CLI maps
// these to JSON error objects on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define TCHAND_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                          \
    public:                                                               \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

TCHAND_DEFINE_ERROR(DegenerateInput);
TCHAND_DEFINE_ERROR(NotARotation);
TCHAND_DEFINE_ERROR(InvalidCamera);
TCHAND_DEFINE_ERROR(InvalidConfig);
TCHAND_DEFINE_ERROR(IoError);
TCHAND_DEFINE_ERROR(OutOfRange);
TCHAND_DEFINE_ERROR(InvalidStrategy);
TCHAND_DEFINE_ERROR(EmptyCandidates);
TCHAND_DEFINE_ERROR(SequenceTooShort);
TCHAND_DEFINE_ERROR(ShapeMismatch);
TCHAND_DEFINE_ERROR(ZeroVector);
TCHAND_DEFINE_ERROR(EmptyBatch);
TCHAND_DEFINE_ERROR(GraphNotBuilt);
TCHAND_DEFINE_ERROR(DegenerateCloud);
TCHAND_DEFINE_ERROR(TooShort);

#undef TCHAND_DEFINE_ERROR

} // namespace tchand
