#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphata/gnn.hpp"
#include "graphata/tensor.hpp"

namespace graphata {

inline constexpr int kCheckpointVersion = 1;

// On-disk layout:
//   line 1: JSON header on one line (keys in insertion order)
//   per array: "array <name> <rows> <cols>" then one line per row
//   last line: "end"
// Values use 17 significant digits, so a round trip is bit-exact.
struct CheckpointFile {
  nlohmann::ordered_json header;
  std::vector<std::pair<std::string, Tensor>> arrays;

  // Throws CheckpointError when the array is missing or has another shape.
  const Tensor& array(const std::string& name, std::size_t rows, std::size_t cols) const;
};

void write_checkpoint_file(const CheckpointFile& file, const std::string& path);
// Truncated or malformed content raises ParseError; nothing is returned
// until the whole file has been read.
CheckpointFile read_checkpoint_file(const std::string& path);

// Header fields shared by every model checkpoint; `kind` is "gnn" or "ata".
nlohmann::ordered_json checkpoint_header(const std::string& kind, const GnnModel& shape_source);
// Checks format, version and kind. Throws CheckpointError.
void check_checkpoint_header(const nlohmann::ordered_json& header, const std::string& kind);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws ParseError on malformed files and CheckpointError on version or shape mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace graphata
