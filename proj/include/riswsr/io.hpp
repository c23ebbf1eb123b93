// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats.
//
// Dataset archive: <dir>/manifest.json plus <dir>/samples/<index>.bin. Each
// sample file holds little-endian float64 values: H (N x M), G (U x N),
// D (U x M), S_II (N x N) as row-major interleaved (re, im) pairs, then w (U).
//
// Checkpoint: <dir>/manifest.json plus <dir>/params.bin, the weight then bias
// of every (layer, class, unit) in lexicographic order, little-endian float64.

#pragma once

#include <filesystem>
#include <string>

#include "riswsr/risnet.hpp"
#include "riswsr/training.hpp"

namespace riswsr::io {

inline constexpr int kFormatVersion = 1;

void save_dataset(const training::Dataset& data, const std::filesystem::path& dir);
training::Dataset load_dataset(const std::filesystem::path& dir);

void save_checkpoint(const risnet::NetworkParams& params, const std::filesystem::path& dir);
risnet::NetworkParams load_checkpoint(const std::filesystem::path& dir);

/// epoch,train_wsr,test_wsr,seconds
void write_run_record_csv(const training::RunRecord& rec, const std::filesystem::path& file);
void write_run_record_json(const training::RunRecord& rec, const std::filesystem::path& file);

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace riswsr::io
