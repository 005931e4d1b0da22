#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "opecalib/provenance.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib {

// JSON Lines dataset format. The first line is a header
//   {"meta": {"state_dim": D, "action_count": A}}
// followed by one trajectory per line:
//   {"id": "...", "steps": [{"s": [...], "a": 0, "r": 0.0}, ...],
//    "terminal": [...] | null, "severity": [...] | null}
// Parse errors name the offending 1-based line number.
TrajectoryDataset read_dataset(std::istream& in);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

void write_dataset(const TrajectoryDataset& dataset, std::ostream& out,
                   const std::optional<Provenance>& provenance = std::nullopt);
void save_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path,
                  const std::optional<Provenance>& provenance = std::nullopt);

}  // namespace opecalib
