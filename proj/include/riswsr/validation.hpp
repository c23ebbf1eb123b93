// SPDX-License-Identifier: Apache-2.0
//
// Self-contained property and oracle checks over small random instances.
// Used by `riswsr validate`.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "riswsr/channel.hpp"
#include "riswsr/linalg.hpp"

namespace riswsr::validation {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Entries circular complex Gaussian with E|z|^2 = scale^2.
linalg::ComplexMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                    double scale = 1.0);

/// Random instance on a rows x cols RIS with i.i.d. H, G, D of rms amplitude
/// `gain`, coupling of strength kappa and simplex weights.
channel::ChannelSample random_instance(std::mt19937_64& rng, std::size_t ris_rows,
                                       std::size_t ris_cols, std::size_t antennas,
                                       std::size_t users, double gain, double kappa);

/// Same instance with users reordered by perm (rows of G and D, weights).
channel::ChannelSample permute_users(const channel::ChannelSample& s,
                                     const std::vector<std::size_t>& perm);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace riswsr::validation
