#pragma once

#include <stdexcept>
#include <string>

namespace conglab {

// Configuration problems (bad models, designs, parameters): CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problems with observed data (logs, traces, summaries): CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveRate : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidPrice : ConfigError {
  using ConfigError::ConfigError;
};
struct UnknownScenario : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidProbability : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidDesign : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidTrace : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidAlpha : ConfigError {
  using ConfigError::ConfigError;
};
struct BadConfig : ConfigError {
  using ConfigError::ConfigError;
};

struct SingularSystem : DataError {
  using DataError::DataError;
};
struct CorruptLog : DataError {
  using DataError::DataError;
};
struct BadTraceCsv : DataError {
  using DataError::DataError;
};
struct EmptyArm : DataError {
  using DataError::DataError;
};
struct EmptyCell : DataError {
  using DataError::DataError;
};
struct WrongDesign : DataError {
  using DataError::DataError;
};
struct KernelTooLong : DataError {
  using DataError::DataError;
};

}  // namespace conglab
