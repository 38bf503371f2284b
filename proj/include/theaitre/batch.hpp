#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <string_view>

#include "theaitre/session.hpp"

namespace theaitre {

struct BatchOutput {
  std::string session_id;
  std::string plain;
  nlohmann::json structured;
};

/// Deterministic id derived from the inputs, so reruns export identical bytes.
std::string batch_session_id(std::string_view prompt_text, std::size_t n_lines, std::uint64_t seed);

/// Generates `n_lines` lines with every line auto-accepted. Timestamps come
/// from a logical clock unless `services.clock` is set.
BatchOutput batch_generate(std::string_view prompt_text, std::size_t n_lines, const GenerationSettings& settings,
                           std::uint64_t seed, SessionServices services, NameTable names = {});

/// Writes <out>.txt and <out>.json; a .txt or .json extension on `out` is
/// dropped first. Returns the two paths.
std::pair<std::filesystem::path, std::filesystem::path> write_exports(const BatchOutput& output,
                                                                      const std::filesystem::path& out);

}  // namespace theaitre
