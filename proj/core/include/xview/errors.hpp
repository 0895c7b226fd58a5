#pragma once

#include <stdexcept>
#include <string>

namespace xview {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Document / schema errors.
class MalformedDocument : public Error { public: using Error::Error; };
class SchemaViolation : public Error { public: using Error::Error; };
class UnknownNodeId : public Error { public: using Error::Error; };

// Evidence ingestion.
class MalformedRecord : public Error { public: using Error::Error; };
class UnknownCamera : public Error { public: using Error::Error; };
class ScoreOutOfRange : public Error { public: using Error::Error; };

// Graph / aggregation.
class EmptyInput : public Error { public: using Error::Error; };
class TypeMismatch : public Error { public: using Error::Error; };
class UnknownEntity : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };

// Geometry.
class AtInfinity : public Error { public: using Error::Error; };
class SingularHomography : public Error { public: using Error::Error; };

// Energy / prior.
class MissingRecord : public Error { public: using Error::Error; };
class UnknownActionLabel : public Error { public: using Error::Error; };
class EmptyTrainingSet : public Error { public: using Error::Error; };

// Sampler / inference / simulator.
class InvalidMove : public Error { public: using Error::Error; };
class NotATree : public Error { public: using Error::Error; };
class InvalidConfig : public Error { public: using Error::Error; };
class TooLarge : public Error { public: using Error::Error; };

// Metrics.
class LengthMismatch : public Error { public: using Error::Error; };

}  // namespace xview
