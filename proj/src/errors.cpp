#include "symot/errors.hpp"

#include <filesystem>

namespace symot {

int exit_code(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return 1;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 1;
}

}  // namespace symot
