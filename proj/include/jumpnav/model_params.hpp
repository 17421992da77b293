#pragma once

#include <jumpnav/kv_config.hpp>

#include <array>
#include <string>

namespace jumpnav {

// Physical parameters of the planar two-leg model. Each planar leg lumps the
// left/right pair of the real robot, so link masses, inertias and torque
// limits are per lumped pair.
struct ModelParams {
  double body_mass = 9.0;          // kg, trunk
  double payload_mass = 0.0;       // kg, carried on the trunk
  double body_inertia = 0.06;      // kg m^2, pitch inertia of the trunk
  double body_half_length = 0.19;  // m, hip to body center

  std::array<double, 2> link_mass = {0.90, 0.44};        // kg (upper, lower)
  std::array<double, 2> link_length = {0.21, 0.21};      // m
  std::array<double, 2> link_com_offset = {0.105, 0.105};  // m from proximal joint
  std::array<double, 2> link_inertia = {3.3e-3, 1.6e-3};   // kg m^2 about the COM

  double gravity = 9.81;  // m/s^2

  double hip_angle_min = -1.6, hip_angle_max = 1.6;    // rad
  double knee_angle_min = 0.15, knee_angle_max = 2.8;  // rad, one-sided bend
  double joint_velocity_limit = 40.0;                  // rad/s, symmetric
  double torque_limit = 34.0;                          // N m per lumped planar joint
  double friction_mu = 0.5;
  double contact_force_z_min = 5.0;    // N while a foot is in contact
  double contact_force_z_max = 500.0;  // N

  double mass_matrix_condition_limit = 1e12;

  double total_mass() const {
    return body_mass + payload_mass + 2.0 * (link_mass[0] + link_mass[1]);
  }
  double leg_length() const { return link_length[0] + link_length[1]; }

  // Throws InvalidParams when a field is outside its documented domain.
  void validate() const;

  static ModelParams from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

}  // namespace jumpnav
