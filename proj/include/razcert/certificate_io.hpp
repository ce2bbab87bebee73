#pragma once

#include <string>

#include "razcert/certificate.hpp"

namespace razcert {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Certificate file, format version 1: constants, gains, equivalence classes,
/// per-class V networks and per-agent policies (weights as base64
/// little-endian float64 blobs, layer-major), Lipschitz bounds, provenance.
/// Loading then saving is byte-identical.
std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);

void save_certificate(const Certificate& cert, const std::string& path);
Certificate load_certificate(const std::string& path);

}  // namespace razcert
