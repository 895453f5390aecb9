#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moddiff/core/data_table.hpp"
#include "moddiff/doe/design.hpp"

namespace moddiff::sim {

// One component model with a reference and an updated parameter variant.
// A version Boolean of 1 selects the updated variant for that step.
struct ModuleDef {
    std::string name;
    std::map<std::string, double> params_ref;
    std::map<std::string, double> params_updated;

    double param(const std::string& key, bool updated) const;
};

struct WorkflowConfig {
    std::vector<ModuleDef> modules; // Battery, Motor, Driveline, Glider

    double dt = 0.1;           // s
    double vehicle_mass = 1600.0; // kg
    double wheel_radius = 0.3; // m
    double gravity = 9.81;     // m/s^2
    double air_density = 1.2;  // kg/m^3
    double initial_soc = 0.95;
    bool regen_enabled = false;

    std::size_t module_index(const std::string& name) const; // ConfigError if unknown
    void validate() const;
};

// Full per-step state. Instantaneous fields hold the values produced by the
// transition that created this state; accumulator fields integrate over time.
// veh_speed and pi_integral are the internal integrator states exported as
// I_* table columns so any row can seed a restart.
struct WorkflowState {
    double b_soc = 0.0;
    double b_power_losses = 0.0;
    double b_energy_losses = 0.0;
    double b_voltage = 0.0;
    double m_power_output = 0.0;
    double m_power_losses = 0.0;
    double m_energy_losses = 0.0;
    double m_net_torque = 0.0;
    double d_motor_speed = 0.0;
    double d_net_tractive_force = 0.0;
    double g_propelling_energy = 0.0;
    double g_tractive_power = 0.0;
    double g_braking_energy = 0.0;
    double g_position = 0.0;
    double veh_speed = 0.0;
    double pi_integral = 0.0;
};

// Canonical column names, in table order (states, then internals).
extern const std::vector<std::string> kStateColumns;    // the 14 physical variables
extern const std::vector<std::string> kInternalColumns; // I_VehicleSpeed, I_PiIntegral

struct DrivingCycle {
    double dt = 0.1;
    std::vector<double> speed_setpoint; // m/s, one per step

    std::size_t n_steps() const { return speed_setpoint.size(); }
    void validate() const;
};

using VersionVector = std::vector<std::uint8_t>; // one Boolean per module

// Advances the state by one dt. Deterministic; each module reads the
// parameter variant selected by its Boolean. Throws NumericError naming the
// variable if a non-finite value appears (step index -1 when unknown).
WorkflowState step(const WorkflowState& state, double setpoint, const VersionVector& versions,
                   const WorkflowConfig& config, long step_index = -1);

// Runs the whole cycle. Row t holds x_t; the transition t -> t+1 uses
// setpoint[t] and the schedule vector at t. X_<Module> columns record the
// schedule; the last row's vector never drives a transition.
DataTable simulate(const WorkflowConfig& config, const DrivingCycle& cycle,
                   const doe::Schedule& schedule);
DataTable simulate(const WorkflowConfig& config, const DrivingCycle& cycle,
                   const VersionVector& constant_versions);

// Reconstructs the full state from a table row (requires the I_* columns) and
// applies step(). Throws SchemaError listing every missing column.
WorkflowState state_from_row(const DataTable& table, std::size_t row);
WorkflowState one_step_from(const DataTable& table, std::size_t row, double setpoint,
                            const VersionVector& versions, const WorkflowConfig& config);

// Returns a copy of `config` whose params_updated apply the given relative
// deltas; params_ref is untouched. Unknown module or parameter names throw
// ConfigError.
struct Perturbation {
    std::string module;
    std::string parameter;
    double relative_delta = 0.0;
};
WorkflowConfig build_w1(const WorkflowConfig& config, const std::vector<Perturbation>& perturbations);

// Defaults: compact-EV magnitudes, all configurable through the config file.
WorkflowConfig default_config();

// Piecewise ramp/hold speed profile, 5960 steps of 0.1 s. Mixes gentle ramps
// with aggressive target jumps so the torque clamp saturates regularly.
DrivingCycle default_cycle();

// Seeded random ramp/hold cycle for property tests.
DrivingCycle random_cycle(std::size_t n, double dt, std::uint64_t seed);

} // namespace moddiff::sim
