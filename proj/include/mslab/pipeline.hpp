#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/config.hpp"
#include "mslab/simulate.hpp"

namespace mslab {

inline constexpr const char* kVersion = "1.0.0";

// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitRegistration = 3, kExitData = 4 };

// Grid the simulator uses for a configuration: the layout's final stack at
// the preset voxel size (0.3 mm in-plane for custom layouts), sim.fov_mm
// in-plane, centred on the world origin.
AffineGeometry simulation_geometry(const PipelineConfig& config);

// LR/HR voxel ratio along z for the configured preset (2 when unknown).
std::size_t lr_factor(const PipelineConfig& config);

// Phantom + motion scenario + acquisition per configuration.
SimulatedDataset simulate_from_config(const PipelineConfig& config);

// Entry point of the `mslab` tool: simulate | reconstruct | register | qc.
// Messages go to `out` / `err`; returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mslab
