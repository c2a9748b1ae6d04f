#include "mourrelab/errors.hpp"

namespace mourrelab {

namespace {

std::string join_items(const std::vector<std::string>& items) {
  std::string msg = "invalid config:";
  for (const auto& item : items) msg += "\n  - " + item;
  return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> items)
    : std::runtime_error(join_items(items)), items_(std::move(items)) {}

}  // namespace mourrelab
