#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "dcat/encoders.hpp"

namespace dcat {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Hash over names, shapes and the exact bit patterns of the values.
std::string state_digest(std::span<const NamedTensor> state);

}  // namespace dcat
