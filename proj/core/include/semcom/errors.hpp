#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Backward requested from a value that is not the output of a taped op.
class GraphError : public Error {
 public:
  using Error::Error;
};

// Signal with zero average power where a power reference is needed.
class DegenerateSignalError : public Error {
 public:
  using Error::Error;
};

// Mask with no ROI pixels where at least one is needed.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

class CheckpointFormatError : public Error {
 public:
  using Error::Error;
};

// Malformed netpbm payloads. The message always names the file.
class MalformedFileError : public Error {
 public:
  using Error::Error;
};

// Mask manifest / mask file ingestion failures. The message names the entry.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace semcom
