#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>

namespace smokeseg {

// Base type for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a 64-bit, used for content hashes of checkpoints and input files.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t value);

// splitmix64 step; used to derive independent per-sample RNG seeds.
std::uint64_t mix_seed(std::uint64_t seed);
std::uint64_t combine_seeds(std::uint64_t a, std::uint64_t b);

std::string iso8601_now();

void ensure_parent_dir(const std::string& file_path);
void ensure_dir(const std::string& dir_path);

}  // namespace smokeseg
