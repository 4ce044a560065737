#pragma once

#include <filesystem>
#include <string>

#include "modfield/signal.hpp"

namespace modfield {

/// Loads a binary PPM (P6, maxval 255) or PFM ("PF" colour / "Pf" grey)
/// image as a dense 2-D signal. PPM bytes map to v / 255. PFM scanlines are
/// stored bottom-to-top; the returned signal has row 0 at the top.
SampledSignal load_image(const std::filesystem::path& path);

/// Writes a dense 2-D signal. The format follows the extension: ".ppm"
/// (m must be 3 or 1; grey is replicated, values clamped to [0,1] and
/// rounded), anything else is PFM written little-endian with scale -1.0.
/// The write is atomic (temp file + rename).
void save_image(const SampledSignal& signal, const std::filesystem::path& path);

/// In-memory encoders used by save_image; exposed for byte-level tests.
std::string encode_ppm(const SampledSignal& signal);
std::string encode_pfm(const SampledSignal& signal);
SampledSignal decode_image(const std::string& bytes, const std::string& name = "<memory>");

/// Writes bytes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace modfield
