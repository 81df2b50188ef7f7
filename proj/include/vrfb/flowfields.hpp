/// @file flowfields.hpp
/// @brief Reference flow-field rasters (parallel, interdigitated), design
///        performance evaluation (pressure drop, flow rate, overpotential,
///        power loss) and operating-point sweeps.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vrfb/config.hpp"
#include "vrfb/electrochem.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"

namespace vrfb {

enum class ReferenceKind { Parallel, Interdigitated };

struct ReferenceFieldSpec {
    ReferenceKind kind = ReferenceKind::Parallel;
    double channel_width = 3.0e-3;  // [m]
    double channel_pitch = 9.0e-3;  // center-to-center [m]
    double manifold_width = 3.0e-3; // [m]
};

ReferenceFieldSpec reference_spec_from_config(ReferenceKind kind, const CaseConfig& cfg);

/// Binary density raster on the design layer: 1 = open channel, 0 = rib.
/// Channels run along x between manifolds on the inlet/outlet faces;
/// interdigitated fingers alternate between inlet-fed and outlet-fed and
/// stop one rib gap short of the opposite manifold.
std::vector<double> generate_reference(const ReferenceFieldSpec& spec, const Grid& grid);

/// Flood fill on fluid design cells (rho >= threshold, 6-connectivity):
/// true if any inlet-adjacent cell reaches an outlet-adjacent cell.
bool through_connected(const Grid& grid, const std::vector<double>& rho, double threshold);

/// Count distinct open channel bands along y at the mid-length column of
/// the raster (top design sublayer).
int count_y_channels(const Grid& grid, const std::vector<double>& rho, double threshold);

struct OperatingPoint {
    double current;                  // applied current I [A]
    double porosity;                 // electrode porosity
    std::optional<double> flow_rate; // target Q [m^3/s]; otherwise dp drives
    std::optional<double> dp;        // pressure drop [Pa]; defaults to config
};

struct PerformanceReport {
    std::string design;
    double current = 0.0;
    double porosity = 0.0;
    double flow_rate_target = 0.0; // 0 when pressure-driven
    double dp = 0.0;               // achieved pressure drop [Pa]
    double q = 0.0;                // achieved flow rate [m^3/s]
    double mean_abs_eta = 0.0;     // electrode-volume average |eta| [V]
    double objective = 0.0;        // mean surface concentration of V3+ [mol/m^3]
    double polarization_loss = 0.0; // I * mean|eta| [W]
    double pumping_loss = 0.0;      // Q * dp [W]
    double power_loss = 0.0;        // sum of the two [W]
    bool ok = true;
    std::string error;
};

/// Full forward evaluation of one design at one operating point. The
/// density is used as given (threshold before calling for binary designs).
/// Flow-rate targeting exploits Stokes linearity (one solve, exact scaling)
/// with a secant fallback, and verifies the 0.5% tolerance.
PerformanceReport evaluate_design(const Grid& grid, const CaseConfig& cfg,
                                  const std::vector<double>& rho, const OperatingPoint& op,
                                  const std::string& name, FlowState* flow_out = nullptr,
                                  ElectroState* electro_out = nullptr);

struct SweepDesign {
    std::string name;
    std::vector<double> rho; // design-layer raster
};

/// Cross product of designs and operating points; failures are recorded
/// per row and the sweep continues.
std::vector<PerformanceReport> sweep(const Grid& grid, const CaseConfig& cfg,
                                     const std::vector<SweepDesign>& designs,
                                     const std::vector<OperatingPoint>& points);

std::string report_csv_header();
std::string report_csv_row(const PerformanceReport& r);

} // namespace vrfb
