#include "moddiff/sim/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moddiff/core/errors.hpp"
#include "moddiff/core/rng.hpp"

namespace moddiff::sim {

const std::vector<std::string> kStateColumns = {
    "B_SOC",          "B_PowerLosses",      "B_EnergyLosses",    "B_VoltageAtTerminals",
    "M_PowerOutput",  "M_PowerLosses",      "M_EnergyLosses",    "M_NetTorque",
    "D_MotorSpeed",   "D_NetTractiveForce", "G_PropellingEnergy", "G_TractivePower",
    "G_BrakingEnergy", "G_Position"};

const std::vector<std::string> kInternalColumns = {"I_VehicleSpeed", "I_PiIntegral"};

double ModuleDef::param(const std::string& key, bool updated) const {
    const auto& params = updated ? params_updated : params_ref;
    auto it = params.find(key);
    if (it == params.end())
        throw ConfigError("module " + name + " has no parameter '" + key + "'");
    return it->second;
}

std::size_t WorkflowConfig::module_index(const std::string& name) const {
    for (std::size_t j = 0; j < modules.size(); ++j)
        if (modules[j].name == name) return j;
    throw ConfigError("unknown module: " + name);
}

void WorkflowConfig::validate() const {
    if (modules.empty()) throw ConfigError("workflow needs at least one module");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    for (double v : {vehicle_mass, wheel_radius, gravity, air_density})
        if (!(v > 0.0)) throw ConfigError("physical constants must be positive");
    if (initial_soc < 0.0 || initial_soc > 1.0)
        throw ConfigError("initial_soc must lie in [0, 1]");
    for (std::size_t j = 0; j < modules.size(); ++j)
        for (std::size_t k = j + 1; k < modules.size(); ++k)
            if (modules[j].name == modules[k].name)
                throw ConfigError("duplicate module name: " + modules[j].name);
}

void DrivingCycle::validate() const {
    if (!(dt > 0.0)) throw ConfigError("cycle dt must be positive");
    if (speed_setpoint.empty()) throw ConfigError("cycle has no steps");
    for (double v : speed_setpoint)
        if (!(v >= 0.0)) throw ConfigError("speed setpoints must be >= 0");
}

namespace {

inline double sgn0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite(double v, const char* name, long step_index) {
    if (!std::isfinite(v)) {
        std::string at = step_index >= 0 ? " at step " + std::to_string(step_index) : "";
        throw NumericError(std::string("simulation diverged: ") + name + " is non-finite" + at);
    }
}

} // namespace

WorkflowState step(const WorkflowState& state, double setpoint, const VersionVector& versions,
                   const WorkflowConfig& config, long step_index) {
    if (versions.size() != config.modules.size())
        throw ConfigError("version vector has " + std::to_string(versions.size()) +
                          " entries, workflow has " + std::to_string(config.modules.size()) +
                          " modules");

    const ModuleDef& battery = config.modules[config.module_index("Battery")];
    const ModuleDef& motor = config.modules[config.module_index("Motor")];
    const ModuleDef& driveline = config.modules[config.module_index("Driveline")];
    const ModuleDef& glider = config.modules[config.module_index("Glider")];

    const bool b_upd = versions[config.module_index("Battery")] != 0;
    const bool m_upd = versions[config.module_index("Motor")] != 0;
    const bool d_upd = versions[config.module_index("Driveline")] != 0;
    const bool g_upd = versions[config.module_index("Glider")] != 0;

    const double R = battery.param("internal_resistance", b_upd);
    const double v_oc = battery.param("open_circuit_voltage", b_upd);
    const double capacity = battery.param("capacity", b_upd);

    const double t_max = motor.param("max_torque", m_upd);
    const double kp = motor.param("kp", m_upd);
    const double ki = motor.param("ki", m_upd);
    const double loss_a = motor.param("loss_torque_coeff", m_upd);
    const double loss_b = motor.param("loss_speed_coeff", m_upd);

    const double g_ratio = driveline.param("gear_ratio", d_upd);
    const double eta = driveline.param("efficiency", d_upd);

    const double c_rr = glider.param("rolling_resistance", g_upd);
    const double cda = glider.param("drag_area", g_upd);

    const double dt = config.dt;
    const double v = state.veh_speed;

    // Motor: PI speed controller with inclusive torque clamp. With
    // regeneration off the motor never brakes; the friction brake covers the
    // commanded shortfall.
    const double err = setpoint - v;
    const double pi_next = state.pi_integral + err * dt;
    const double t_cmd = kp * err + ki * pi_next;
    const double t_floor = config.regen_enabled ? -t_max : 0.0;
    const double t_motor = std::clamp(t_cmd, t_floor, t_max);

    // Driveline.
    const double omega = g_ratio * v / config.wheel_radius;
    const double f_tractive = eta * g_ratio * t_motor / config.wheel_radius;
    const double brake_shortfall = std::max(0.0, t_motor - t_cmd);
    const double f_brake = eta * g_ratio * brake_shortfall / config.wheel_radius;

    // Glider longitudinal dynamics; the vehicle never rolls backwards.
    const double f_roll = c_rr * config.vehicle_mass * config.gravity * sgn0(v);
    const double f_drag = 0.5 * config.air_density * cda * v * v;
    const double accel = (f_tractive - f_roll - f_drag - f_brake) / config.vehicle_mass;
    const double v_next = std::max(0.0, v + accel * dt);

    // Motor electrical side.
    const double p_out = t_motor * omega;
    const double p_loss_m = loss_a * t_motor * t_motor + loss_b * std::fabs(omega);

    // Battery: I = P/V_oc simple model.
    const double p_batt = p_out + p_loss_m;
    const double current = p_batt / v_oc;
    const double p_loss_b = R * current * current;
    const double v_term = v_oc - R * current;
    const double soc_next = std::clamp(state.b_soc - current * dt / capacity, 0.0, 1.0);

    const double p_tractive = f_tractive * v;

    WorkflowState next;
    next.b_soc = soc_next;
    next.b_power_losses = p_loss_b;
    next.b_energy_losses = state.b_energy_losses + p_loss_b * dt;
    next.b_voltage = v_term;
    next.m_power_output = p_out;
    next.m_power_losses = p_loss_m;
    next.m_energy_losses = state.m_energy_losses + p_loss_m * dt;
    next.m_net_torque = t_motor;
    next.d_motor_speed = omega;
    next.d_net_tractive_force = f_tractive - f_brake;
    next.g_propelling_energy = state.g_propelling_energy + std::max(p_tractive, 0.0) * dt;
    next.g_tractive_power = p_tractive;
    next.g_braking_energy = state.g_braking_energy + std::max(-p_tractive, 0.0) * dt;
    next.g_position = state.g_position + v_next * dt;
    next.veh_speed = v_next;
    next.pi_integral = pi_next;

    check_finite(next.b_soc, "B_SOC", step_index);
    check_finite(next.b_power_losses, "B_PowerLosses", step_index);
    check_finite(next.b_voltage, "B_VoltageAtTerminals", step_index);
    check_finite(next.m_power_output, "M_PowerOutput", step_index);
    check_finite(next.m_net_torque, "M_NetTorque", step_index);
    check_finite(next.d_motor_speed, "D_MotorSpeed", step_index);
    check_finite(next.veh_speed, "I_VehicleSpeed", step_index);
    check_finite(next.pi_integral, "I_PiIntegral", step_index);
    return next;
}

namespace {

std::vector<double> state_to_row(const WorkflowState& s) {
    return {s.b_soc,          s.b_power_losses, s.b_energy_losses,    s.b_voltage,
            s.m_power_output, s.m_power_losses, s.m_energy_losses,    s.m_net_torque,
            s.d_motor_speed,  s.d_net_tractive_force, s.g_propelling_energy,
            s.g_tractive_power, s.g_braking_energy, s.g_position,
            s.veh_speed,      s.pi_integral};
}

WorkflowState initial_state(const WorkflowConfig& config, const VersionVector& versions) {
    WorkflowState s;
    s.b_soc = config.initial_soc;
    const ModuleDef& battery = config.modules[config.module_index("Battery")];
    const bool b_upd = versions[config.module_index("Battery")] != 0;
    s.b_voltage = battery.param("open_circuit_voltage", b_upd);
    return s;
}

} // namespace

DataTable simulate(const WorkflowConfig& config, const DrivingCycle& cycle,
                   const doe::Schedule& schedule) {
    config.validate();
    cycle.validate();
    const std::size_t n = cycle.n_steps();
    if (schedule.n_steps() != n)
        throw ConfigError("schedule has " + std::to_string(schedule.n_steps()) +
                          " steps, cycle has " + std::to_string(n));
    if (schedule.module_names.size() != config.modules.size())
        throw ConfigError("schedule module count does not match workflow");

    std::vector<WorkflowState> states;
    states.reserve(n);
    states.push_back(initial_state(config, schedule.steps[0]));
    for (std::size_t t = 0; t + 1 < n; ++t)
        states.push_back(step(states[t], cycle.speed_setpoint[t], schedule.steps[t], config,
                              static_cast<long>(t)));

    DataTable table;
    std::vector<double> idx(n);
    std::iota(idx.begin(), idx.end(), 0.0);
    table.add_column("t", ColumnRole::Index, std::move(idx));

    const std::size_t n_state = kStateColumns.size();
    for (std::size_t c = 0; c < n_state; ++c) {
        std::vector<double> col(n);
        for (std::size_t t = 0; t < n; ++t) col[t] = state_to_row(states[t])[c];
        table.add_column(kStateColumns[c], ColumnRole::State, std::move(col));
    }
    for (std::size_t c = 0; c < kInternalColumns.size(); ++c) {
        std::vector<double> col(n);
        for (std::size_t t = 0; t < n; ++t) col[t] = state_to_row(states[t])[n_state + c];
        table.add_column(kInternalColumns[c], ColumnRole::Internal, std::move(col));
    }
    table.add_column("speed_setpoint", ColumnRole::Imposed, cycle.speed_setpoint);
    for (std::size_t j = 0; j < config.modules.size(); ++j) {
        std::vector<double> col(n);
        for (std::size_t t = 0; t < n; ++t) col[t] = schedule.steps[t][j];
        table.add_column("X_" + config.modules[j].name, ColumnRole::Boolean, std::move(col));
    }
    return table;
}

DataTable simulate(const WorkflowConfig& config, const DrivingCycle& cycle,
                   const VersionVector& constant_versions) {
    doe::Schedule s;
    s.segment_length = cycle.n_steps();
    for (const auto& mod : config.modules) s.module_names.push_back(mod.name);
    s.steps.assign(cycle.n_steps(), constant_versions);
    return simulate(config, cycle, s);
}

WorkflowState state_from_row(const DataTable& table, std::size_t row) {
    std::vector<std::string> missing;
    auto need = [&](const std::string& name) -> double {
        if (!table.has_column(name)) {
            missing.push_back(name);
            return 0.0;
        }
        return table.col(name)[row];
    };

    WorkflowState s;
    s.b_soc = need("B_SOC");
    s.b_power_losses = need("B_PowerLosses");
    s.b_energy_losses = need("B_EnergyLosses");
    s.b_voltage = need("B_VoltageAtTerminals");
    s.m_power_output = need("M_PowerOutput");
    s.m_power_losses = need("M_PowerLosses");
    s.m_energy_losses = need("M_EnergyLosses");
    s.m_net_torque = need("M_NetTorque");
    s.d_motor_speed = need("D_MotorSpeed");
    s.d_net_tractive_force = need("D_NetTractiveForce");
    s.g_propelling_energy = need("G_PropellingEnergy");
    s.g_tractive_power = need("G_TractivePower");
    s.g_braking_energy = need("G_BrakingEnergy");
    s.g_position = need("G_Position");
    s.veh_speed = need("I_VehicleSpeed");
    s.pi_integral = need("I_PiIntegral");

    if (!missing.empty()) {
        std::string msg = "row is missing state columns:";
        for (const auto& m : missing) msg += " " + m;
        throw SchemaError(msg);
    }
    return s;
}

WorkflowState one_step_from(const DataTable& table, std::size_t row, double setpoint,
                            const VersionVector& versions, const WorkflowConfig& config) {
    return step(state_from_row(table, row), setpoint, versions, config,
                static_cast<long>(row));
}

WorkflowConfig build_w1(const WorkflowConfig& config,
                        const std::vector<Perturbation>& perturbations) {
    WorkflowConfig out = config;
    for (auto& mod : out.modules) mod.params_updated = mod.params_ref;
    for (const auto& p : perturbations) {
        ModuleDef& mod = out.modules[out.module_index(p.module)];
        auto it = mod.params_updated.find(p.parameter);
        if (it == mod.params_updated.end())
            throw ConfigError("module " + p.module + " has no parameter '" + p.parameter + "'");
        it->second *= (1.0 + p.relative_delta);
    }
    return out;
}

WorkflowConfig default_config() {
    WorkflowConfig c;
    c.modules = {
        ModuleDef{"Battery",
                  {{"internal_resistance", 0.05},
                   {"open_circuit_voltage", 350.0},
                   {"capacity", 1.44e5}},
                  {}},
        ModuleDef{"Motor",
                  {{"max_torque", 250.0},
                   {"kp", 100.0},
                   {"ki", 30.0},
                   {"loss_torque_coeff", 0.02},
                   {"loss_speed_coeff", 0.1}},
                  {}},
        ModuleDef{"Driveline", {{"gear_ratio", 9.0}, {"efficiency", 0.97}}, {}},
        ModuleDef{"Glider", {{"rolling_resistance", 0.01}, {"drag_area", 0.6}}, {}},
    };
    for (auto& mod : c.modules) mod.params_updated = mod.params_ref;
    return c;
}

namespace {

// Appends a ramp from `from` to `to` over ramp_s seconds then holds for
// hold_s. Durations are rounded to whole steps.
void append_phase(std::vector<double>& sp, double dt, double from, double to, double ramp_s,
                  double hold_s) {
    const std::size_t ramp_n = static_cast<std::size_t>(std::lround(ramp_s / dt));
    const std::size_t hold_n = static_cast<std::size_t>(std::lround(hold_s / dt));
    for (std::size_t k = 1; k <= ramp_n; ++k)
        sp.push_back(from + (to - from) * static_cast<double>(k) / static_cast<double>(ramp_n));
    for (std::size_t k = 0; k < hold_n; ++k) sp.push_back(to);
}

} // namespace

DrivingCycle default_cycle() {
    DrivingCycle cycle;
    cycle.dt = 0.1;
    auto& sp = cycle.speed_setpoint;
    sp.reserve(6000);

    // target speed (m/s), ramp duration (s), hold duration (s)
    struct Phase {
        double target, ramp_s, hold_s;
    };
    const Phase phases[] = {
        {0.0, 0.0, 3.0},  {12.0, 2.0, 18.0}, {20.0, 3.0, 22.0}, {8.0, 4.0, 12.0},
        {25.0, 2.5, 25.0}, {15.0, 5.0, 15.0}, {28.0, 3.0, 28.0}, {0.0, 6.0, 6.0},
        {10.0, 1.5, 14.0}, {22.0, 2.0, 20.0}, {13.0, 4.0, 10.0}, {30.0, 4.0, 30.0},
        {18.0, 5.0, 16.0}, {26.0, 2.0, 22.0}, {5.0, 6.0, 8.0},   {17.0, 1.5, 18.0},
        {24.0, 3.0, 24.0}, {9.0, 5.0, 10.0},  {21.0, 2.0, 20.0}, {0.0, 7.0, 5.0},
        {14.0, 1.5, 16.0}, {27.0, 3.5, 26.0}, {11.0, 5.0, 12.0}, {19.0, 2.0, 18.0},
    };

    double current = 0.0;
    for (const auto& ph : phases) {
        append_phase(sp, cycle.dt, current, ph.target, ph.ramp_s, ph.hold_s);
        current = ph.target;
        if (sp.size() >= 5960) break;
    }
    while (sp.size() < 5960) sp.push_back(current);
    sp.resize(5960);
    return cycle;
}

DrivingCycle random_cycle(std::size_t n, double dt, std::uint64_t seed) {
    DrivingCycle cycle;
    cycle.dt = dt;
    auto eng = make_engine(seed, "cycle");
    auto& sp = cycle.speed_setpoint;
    sp.reserve(n + 64);
    double current = 0.0;
    while (sp.size() < n) {
        const double target = uniform(eng, 0.0, 30.0);
        const double ramp_s = uniform(eng, 1.0, 8.0);
        const double hold_s = uniform(eng, 3.0, 20.0);
        append_phase(sp, dt, current, target, ramp_s, hold_s);
        current = target;
    }
    sp.resize(n);
    return cycle;
}

} // namespace moddiff::sim
