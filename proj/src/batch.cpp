#include "theaitre/batch.hpp"

#include <cstdio>
#include <fstream>

#include "theaitre/error.hpp"

namespace theaitre {

std::string batch_session_id(std::string_view prompt_text, std::size_t n_lines, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  mix(prompt_text);
  mix(std::to_string(n_lines));
  mix(std::to_string(seed));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("batch-") + buf;
}

BatchOutput batch_generate(std::string_view prompt_text, std::size_t n_lines, const GenerationSettings& settings,
                           std::uint64_t seed, SessionServices services, NameTable names) {
  if (!services.clock) services.clock = logical_clock();
  const auto id = batch_session_id(prompt_text, n_lines, seed);
  auto session = Session::create(id, prompt_text, settings, seed, std::move(services), std::move(names));
  for (std::size_t i = 0; i < n_lines; ++i) session->generate_next();
  return {id, session->export_plain(), session->export_structured()};
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Storage, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::Storage, "short write to " + path.string());
}

}  // namespace

std::pair<std::filesystem::path, std::filesystem::path> write_exports(const BatchOutput& output,
                                                                      const std::filesystem::path& out) {
  auto stem = out;
  if (stem.extension() == ".txt" || stem.extension() == ".json") stem.replace_extension();
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const auto txt = std::filesystem::path(stem.string() + ".txt");
  const auto js = std::filesystem::path(stem.string() + ".json");
  write_file(txt, output.plain);
  write_file(js, output.structured.dump(2) + "\n");
  return {txt, js};
}

}  // namespace theaitre
