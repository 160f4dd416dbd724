#pragma once

// Bus-branch grid model, Newton-Raphson AC power flow and constraint evaluation.
//
// Internal quantities are per-unit on Grid::base_mva. Everything crossing the
// public surface (injections, slack power, losses, ratings) is MW / MVAr / MVA,
// except voltages (p.u.) and angles (rad).

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autoenv::grid {

enum class UnitKind { generator, load, storage };

struct Bus {
    std::string name;
    bool slack = false;
};

/// Pi-model line. r, x and total shunt susceptance b in p.u.
struct Line {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;
    double s_max_mva = 0.0;
};

/// Series-impedance transformer with a real off-nominal ratio on the HV side.
struct Transformer {
    int hv_bus = 0;
    int lv_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double tap = 1.0;
    double s_max_mva = 0.0;
};

/// A generator, load or storage attached to a bus.
///
/// Power ranges are given in the unit's own sign convention: loads consume
/// positive active power, generators and storages inject it.
struct Unit {
    std::string name;
    int bus = 0;
    UnitKind kind = UnitKind::load;
    double p_min_nom = 0.0;
    double p_max_nom = 0.0;
    double q_min_nom = 0.0;
    double q_max_nom = 0.0;
    bool controllable = false;
    bool renewable = false;

    /// +1 if positive unit power flows into the grid, -1 for loads.
    [[nodiscard]] double injection_sign() const { return kind == UnitKind::load ? -1.0 : 1.0; }
};

struct Grid {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Transformer> transformers;
    std::vector<Unit> units;
    double base_mva = 1.0;

    [[nodiscard]] std::size_t bus_count() const { return buses.size(); }
    [[nodiscard]] int slack_bus() const;
};

/// Throws ConfigError unless the grid has exactly one slack bus, every branch
/// endpoint exists, the network is connected and all unit ranges are ordered.
void validate(const Grid& grid);

struct ConstraintLimits {
    double v_min = 0.95;
    double v_max = 1.05;
    double max_line_loading = 1.0;   // fraction of s_max_mva
    double max_trafo_loading = 1.0;
    double slack_p_min_mw = -1e9;
    double slack_p_max_mw = 1e9;
    double slack_q_min_mvar = -1e9;
    double slack_q_max_mvar = 1e9;
};

/// Net per-bus injections, generation positive.
struct BusInjections {
    std::vector<double> p_mw;
    std::vector<double> q_mvar;

    explicit BusInjections(std::size_t n = 0) : p_mw(n, 0.0), q_mvar(n, 0.0) {}
};

struct PowerFlowOptions {
    double tolerance_pu = 1e-8;
    int max_iterations = 20;
};

struct PowerFlowSolution {
    std::vector<double> vm_pu;
    std::vector<double> va_rad;
    std::vector<double> line_loading;    // fraction of s_max_mva
    std::vector<double> trafo_loading;
    double slack_p_mw = 0.0;
    double slack_q_mvar = 0.0;
    double p_loss_mw = 0.0;
    double max_mismatch_pu = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Holds the admittance matrix of a validated grid so repeated solves on the
/// same topology skip validation and matrix assembly.
class PowerFlowSolver {
public:
    explicit PowerFlowSolver(Grid grid, PowerFlowOptions options = {});

    [[nodiscard]] PowerFlowSolution solve(const BusInjections& injections) const;
    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] const Eigen::MatrixXcd& admittance() const { return ybus_; }

private:
    Grid grid_;
    PowerFlowOptions options_;
    Eigen::MatrixXcd ybus_;
    int slack_ = 0;
    std::vector<int> pq_buses_;
};

/// Flat-start Newton-Raphson in polar coordinates. A singular Jacobian or a
/// mismatch above tolerance after max_iterations yields converged == false.
[[nodiscard]] PowerFlowSolution run_power_flow(const Grid& grid, const BusInjections& injections,
                                               PowerFlowOptions options = {});

/// Bus admittance matrix in p.u.
[[nodiscard]] Eigen::MatrixXcd build_admittance(const Grid& grid);

// ---------------------------------------------------------------------------
// Constraints and penalty

/// Violation magnitudes, all nonnegative. Voltage in p.u., branches in MVA
/// above the rating, slack ranges in MW / MVAr.
struct ConstraintReport {
    bool converged = false;
    std::vector<double> voltage;
    std::vector<double> line;
    std::vector<double> trafo;
    double slack_p = 0.0;
    double slack_q = 0.0;
    bool valid = false;
};

/// Violations at or below this magnitude (in p.u. of the grid base) count as zero.
inline constexpr double kViolationTolerancePu = 1e-6;

/// Penalty of a non-converged power flow.
inline constexpr double kDivergedPenalty = 10.0;

[[nodiscard]] ConstraintReport evaluate_constraints(const Grid& grid, const PowerFlowSolution& solution,
                                                    const ConstraintLimits& limits);

/// Per-constraint normalizers: the width of each admissible range.
struct PenaltyScaling {
    double voltage = 1.0;
    std::vector<double> line;
    std::vector<double> trafo;
    double slack_p = 1.0;
    double slack_q = 1.0;

    static PenaltyScaling from_limits(const Grid& grid, const ConstraintLimits& limits);
};

/// Sum of normalized violations. Zero iff the report is valid; kDivergedPenalty
/// for a non-converged power flow.
[[nodiscard]] double penalty(const ConstraintReport& report, const PenaltyScaling& scaling);

}  // namespace autoenv::grid
