#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace percs {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);

// Little-endian primitives shared by the binary formats.
void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32le(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32le(std::span<const std::uint8_t> bytes, std::size_t offset);
float get_f32le(std::span<const std::uint8_t> bytes, std::size_t offset);

}  // namespace percs
