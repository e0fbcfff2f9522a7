#ifndef TRACKDIFF_ERRORS_HPP_
#define TRACKDIFF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace trackdiff {

// Base for every error this library throws on its own behalf.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define TRACKDIFF_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& what) : Error(what) {}        \
    }

// trace model
TRACKDIFF_DEFINE_ERROR(MalformedTrace);
TRACKDIFF_DEFINE_ERROR(DanglingReference);

// filter rules
TRACKDIFF_DEFINE_ERROR(UnsupportedRule);
TRACKDIFF_DEFINE_ERROR(MalformedRule);
TRACKDIFF_DEFINE_ERROR(NotAnException);
TRACKDIFF_DEFINE_ERROR(MissingField);

// diff engine
TRACKDIFF_DEFINE_ERROR(UnreadableImage);
TRACKDIFF_DEFINE_ERROR(PairingMismatch);
TRACKDIFF_DEFINE_ERROR(WrongPairCount);

// features
TRACKDIFF_DEFINE_ERROR(IncompleteDiff);
TRACKDIFF_DEFINE_ERROR(UnknownTarget);

// classifier
TRACKDIFF_DEFINE_ERROR(DegenerateDataset);
TRACKDIFF_DEFINE_ERROR(RegistryMismatch);
TRACKDIFF_DEFINE_ERROR(DegenerateFold);
TRACKDIFF_DEFINE_ERROR(CorruptModel);

// pipeline
TRACKDIFF_DEFINE_ERROR(MissingRuns);
TRACKDIFF_DEFINE_ERROR(MissingJob);
TRACKDIFF_DEFINE_ERROR(EmptyEvaluation);

#undef TRACKDIFF_DEFINE_ERROR

}  // namespace trackdiff

#endif  // TRACKDIFF_ERRORS_HPP_
