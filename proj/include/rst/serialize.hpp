// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rst/tensor.hpp"

namespace rst {

/// One named float tensor inside an archive.
struct ArchiveEntry {
    std::string name;
    Tensor<float> tensor;
};

struct TensorArchive {
    std::string meta_json;
    std::vector<ArchiveEntry> entries;
};

/// Write the binary tensor-archive format (magic, sized payload, checksum).
void write_tensor_archive(const std::filesystem::path& path, const std::string& meta_json,
                          const std::vector<ArchiveEntry>& entries);

/// Read an archive; throws NotFound for a missing file and CorruptCheckpoint
/// for truncation, checksum or format violations.
TensorArchive read_tensor_archive(const std::filesystem::path& path);

}  // namespace rst
