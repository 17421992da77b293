#include <jumpnav/model_params.hpp>

#include <jumpnav/errors.hpp>

namespace jumpnav {

void ModelParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw InvalidParams(std::string(name) + " must be strictly positive");
  };
  positive(body_mass, "body_mass");
  positive(body_inertia, "body_inertia");
  positive(body_half_length, "body_half_length");
  for (int i = 0; i < 2; ++i) {
    positive(link_mass[i], "link_mass");
    positive(link_length[i], "link_length");
    positive(link_inertia[i], "link_inertia");
    positive(link_com_offset[i], "link_com_offset");
    if (link_com_offset[i] > link_length[i])
      throw InvalidParams("link_com_offset exceeds link_length");
  }
  if (payload_mass < 0.0) throw InvalidParams("payload_mass must be non-negative");
  positive(gravity, "gravity");
  if (!(hip_angle_min < hip_angle_max)) throw InvalidParams("hip angle limits inverted");
  if (!(knee_angle_min < knee_angle_max)) throw InvalidParams("knee angle limits inverted");
  positive(joint_velocity_limit, "joint_velocity_limit");
  positive(torque_limit, "torque_limit");
  if (!(friction_mu > 0.0 && friction_mu <= 2.0))
    throw InvalidParams("friction_mu must be in (0, 2]");
  if (!(contact_force_z_min < contact_force_z_max))
    throw InvalidParams("contact force limits inverted");
  if (contact_force_z_min < 0.0)
    throw InvalidParams("contact_force_z_min must be non-negative");
  positive(mass_matrix_condition_limit, "mass_matrix_condition_limit");
}

ModelParams ModelParams::from_config(const KvConfig& cfg) {
  ModelParams p;
  p.body_mass = cfg.get_double("body_mass", p.body_mass);
  p.payload_mass = cfg.get_double("payload_mass", p.payload_mass);
  p.body_inertia = cfg.get_double("body_inertia", p.body_inertia);
  p.body_half_length = cfg.get_double("body_half_length", p.body_half_length);
  p.link_mass[0] = cfg.get_double("link_mass_upper", p.link_mass[0]);
  p.link_mass[1] = cfg.get_double("link_mass_lower", p.link_mass[1]);
  p.link_length[0] = cfg.get_double("link_length_upper", p.link_length[0]);
  p.link_length[1] = cfg.get_double("link_length_lower", p.link_length[1]);
  p.link_com_offset[0] = cfg.get_double("link_com_offset_upper", p.link_com_offset[0]);
  p.link_com_offset[1] = cfg.get_double("link_com_offset_lower", p.link_com_offset[1]);
  p.link_inertia[0] = cfg.get_double("link_inertia_upper", p.link_inertia[0]);
  p.link_inertia[1] = cfg.get_double("link_inertia_lower", p.link_inertia[1]);
  p.gravity = cfg.get_double("gravity", p.gravity);
  p.hip_angle_min = cfg.get_double("hip_angle_min", p.hip_angle_min);
  p.hip_angle_max = cfg.get_double("hip_angle_max", p.hip_angle_max);
  p.knee_angle_min = cfg.get_double("knee_angle_min", p.knee_angle_min);
  p.knee_angle_max = cfg.get_double("knee_angle_max", p.knee_angle_max);
  p.joint_velocity_limit = cfg.get_double("joint_velocity_limit", p.joint_velocity_limit);
  p.torque_limit = cfg.get_double("torque_limit", p.torque_limit);
  p.friction_mu = cfg.get_double("friction_mu", p.friction_mu);
  p.contact_force_z_min = cfg.get_double("contact_force_z_min", p.contact_force_z_min);
  p.contact_force_z_max = cfg.get_double("contact_force_z_max", p.contact_force_z_max);
  p.mass_matrix_condition_limit =
      cfg.get_double("mass_matrix_condition_limit", p.mass_matrix_condition_limit);
  p.validate();
  return p;
}

KvConfig ModelParams::to_config() const {
  KvConfig cfg;
  cfg.set_double("body_mass", body_mass);
  cfg.set_double("payload_mass", payload_mass);
  cfg.set_double("body_inertia", body_inertia);
  cfg.set_double("body_half_length", body_half_length);
  cfg.set_double("link_mass_upper", link_mass[0]);
  cfg.set_double("link_mass_lower", link_mass[1]);
  cfg.set_double("link_length_upper", link_length[0]);
  cfg.set_double("link_length_lower", link_length[1]);
  cfg.set_double("link_com_offset_upper", link_com_offset[0]);
  cfg.set_double("link_com_offset_lower", link_com_offset[1]);
  cfg.set_double("link_inertia_upper", link_inertia[0]);
  cfg.set_double("link_inertia_lower", link_inertia[1]);
  cfg.set_double("gravity", gravity);
  cfg.set_double("hip_angle_min", hip_angle_min);
  cfg.set_double("hip_angle_max", hip_angle_max);
  cfg.set_double("knee_angle_min", knee_angle_min);
  cfg.set_double("knee_angle_max", knee_angle_max);
  cfg.set_double("joint_velocity_limit", joint_velocity_limit);
  cfg.set_double("torque_limit", torque_limit);
  cfg.set_double("friction_mu", friction_mu);
  cfg.set_double("contact_force_z_min", contact_force_z_min);
  cfg.set_double("contact_force_z_max", contact_force_z_max);
  cfg.set_double("mass_matrix_condition_limit", mass_matrix_condition_limit);
  return cfg;
}

}  // namespace jumpnav
