#pragma once

#include "damctl/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace damctl {

/// A validated configuration and the warnings raised while checking it.
struct LoadedConfig {
    ModelConfig config;
    std::vector<std::string> warnings;
};

/// Parses the sectioned `key = value` format:
///
///   [dam]        h_max h_min h0 beta_max beta_min_base surface gravity
///   [economics]  h_plus h_minus ell_bar mu P energy efficiency kappa rho
///                penalty_coeff beta_floor_mode (paper | outflow)
///   [hawkes]     a b c
///   [marks]      values probs         (comma-separated lists)
///   [grid]       nh nl ell_min ell_max
///   [numerics]   tol max_iter
///   [simulation] dt_int dt_dec t_cut max_events
///
/// `#` starts a comment. Keys left out keep their default. Unknown sections
/// or keys, duplicates and malformed numbers raise ConfigError with the key
/// path; the result is validated, and mark probabilities are never renormalised.
LoadedConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// Reads and parses a file; IoError when it cannot be read.
LoadedConfig load_config(const std::string& path);

/// Canonical text form: every key, fixed order, 17 significant digits.
/// parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const ModelConfig& cfg);

/// FNV-1a hash of the sorted `section.key=value` lines; insensitive to the
/// order of keys in the source file.
std::uint64_t config_hash(const ModelConfig& cfg);

/// Scalar field access by "section.key"; lists and the floor mode are not
/// scalar. set_numeric does not validate.
double get_numeric(const ModelConfig& cfg, const std::string& key);
void set_numeric(ModelConfig& cfg, const std::string& key, double value);

std::string hash_hex(std::uint64_t h);

/// Shortest-roundtrip-safe decimal form used in all text outputs.
std::string format_double(double x);

} // namespace damctl
