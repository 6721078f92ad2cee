#pragma once

#include <stdexcept>
#include <string>

namespace oserve {

// Base class for all errors raised by the scheduling/simulation stack.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// A replica configuration cannot host the model (memory check failed).
class InfeasibleReplica : public Error {
  public:
    explicit InfeasibleReplica(const std::string &msg) : Error(msg) {}
};

// The model does not fit on the whole cluster.
class ModelTooLarge : public Error {
  public:
    explicit ModelTooLarge(const std::string &msg) : Error(msg) {}
};

// Exhaustive enumeration requested beyond the device-count guard.
class TooLarge : public Error {
  public:
    explicit TooLarge(const std::string &msg) : Error(msg) {}
};

class EmptyDeployment : public Error {
  public:
    explicit EmptyDeployment(const std::string &msg) : Error(msg) {}
};

// LCM normalization exceeded the 64-bit range; callers fall back to
// rational rescaling.
class LcmOverflow : public Error {
  public:
    explicit LcmOverflow(const std::string &msg) : Error(msg) {}
};

// No feasible mutation found within the retry budget for one search step.
class NoFeasibleMutation : public Error {
  public:
    explicit NoFeasibleMutation(const std::string &msg) : Error(msg) {}
};

// A byte range required by the target layout has no holder in the source.
class UnsourcedFragment : public Error {
  public:
    explicit UnsourcedFragment(const std::string &msg) : Error(msg) {}
};

// A simulated span is not covered by any timeline entry.
class TimelineGap : public Error {
  public:
    explicit TimelineGap(const std::string &msg) : Error(msg) {}
};

class NoCompletions : public Error {
  public:
    explicit NoCompletions(const std::string &msg) : Error(msg) {}
};

class TooFewRecords : public Error {
  public:
    explicit TooFewRecords(const std::string &msg) : Error(msg) {}
};

// RRMSE undefined because the actual series has zero mean.
class DegenerateActuals : public Error {
  public:
    explicit DegenerateActuals(const std::string &msg) : Error(msg) {}
};

// Input file failed to parse; message names the file and location.
class ParseError : public Error {
  public:
    explicit ParseError(const std::string &msg) : Error(msg) {}
};

}  // namespace oserve
