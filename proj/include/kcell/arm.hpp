// Copyright 2026 The kcell Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
//
// Dynamics of one arm's pitch chain (shoulder, elbow and wrist pitch) as
// point masses in the vertical plane selected by a fixed shoulder yaw.
// Joint angles are measured from the horizontal, positive upward.

#ifndef KCELL_ARM_HPP_
#define KCELL_ARM_HPP_

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "kcell/domain.hpp"

namespace kcell {

struct Link {
  std::string name;
  double mass_kg = 0.0;
  double length_m = 0.0;
  // Position of the link's point mass along the link, from its joint.
  double com_fraction = 0.5;
};

/// Extra point mass (actuator, tool) riding on a pitch link.
struct AttachedMass {
  std::string name;
  int pitch_link = 0;
  double distance_m = 0.0;
  double mass_kg = 0.0;
};

struct JointLimit {
  std::string joint;
  double min_deg = -180.0;
  double max_deg = 180.0;
};

struct ActuatorType {
  std::string name;
  double mass_kg = 0.0;
  double continuous_nm = 0.0;
  double peak_nm = 0.0;
};

inline constexpr std::array<const char*, 3> kPitchJoints{"shoulder_pitch", "elbow_pitch",
                                                          "wrist_pitch"};

struct ArmModel {
  std::vector<Link> links;
  // Indices into `links` of the upper arm, forearm and wrist.
  std::array<int, 3> pitch_links{2, 3, 4};
  std::vector<AttachedMass> attached;
  std::vector<JointLimit> limits;
  std::vector<ActuatorType> actuators;
  std::map<std::string, std::string> joint_actuator;
  double gravity = 9.81;
  // Point payload held at the tip.
  double tip_mass_kg = 0.0;
  // Shoulder pitch axis location and the fixed yaw of the pitch plane.
  Eigen::Vector3d shoulder_position{0.0, 0.42, 1.3};
  double shoulder_yaw_rad = 0.0;

  static ArmModel defaults() {
    ArmModel m;
    m.links = {{"clavicle", 1.457, 0.420, 0.5},
               {"shoulder", 2.154, 0.150, 0.5},
               {"upper_arm", 1.570, 0.400, 0.5},
               {"forearm", 0.854, 0.375, 0.5},
               {"wrist", 0.733, 0.085, 0.5}};
    // The elbow actuator sits at the shoulder axis and drives the elbow
    // through a linkage; the wrist actuators sit at the wrist joint.
    m.attached = {{"elbow_pitch_actuator", 0, 0.0, 0.925},
                  {"wrist_pitch_actuator", 2, 0.0, 0.250},
                  {"wrist_roll_actuator", 2, 0.0, 0.250}};
    m.limits = {{"torso_yaw", -180, 180},     {"shoulder_yaw", -130, 130},
                {"shoulder_pitch", -180, 180}, {"elbow_pitch", -150, 95},
                {"wrist_pitch", -133, 111},   {"wrist_roll", -180, 180}};
    m.actuators = {{"type1", 0.650, 16.8, 33.5}, {"type2", 0.925, 33.0, 67.0},
                   {"type3", 0.250, 4.2, 10.5}};
    m.joint_actuator = {{"torso_yaw", "type1"},      {"shoulder_yaw", "type1"},
                        {"shoulder_pitch", "type2"}, {"elbow_pitch", "type2"},
                        {"wrist_pitch", "type3"},    {"wrist_roll", "type3"}};
    return m;
  }

  const ActuatorType& actuator_for(const std::string& joint) const {
    auto it = joint_actuator.find(joint);
    if (it == joint_actuator.end()) throw Error("no actuator for joint " + joint);
    for (const auto& a : actuators)
      if (a.name == it->second) return a;
    throw Error("unknown actuator type " + it->second);
  }

  void validate() const {
    for (int i : pitch_links)
      if (i < 0 || i >= static_cast<int>(links.size())) throw Error("pitch link index out of range");
    for (const auto& l : links) {
      if (!(l.mass_kg > 0) || !(l.length_m > 0)) throw Error("link " + l.name + " needs positive mass and length");
      if (l.com_fraction < 0 || l.com_fraction > 1) throw Error("link " + l.name + " com fraction outside [0, 1]");
    }
    for (const auto& a : attached)
      if (a.pitch_link < 0 || a.pitch_link > 2 || a.mass_kg < 0) throw Error("bad attached mass " + a.name);
    if (tip_mass_kg < 0) throw Error("negative tip mass");
  }
};

struct JointState {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd qd = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd qdd = Eigen::VectorXd::Zero(3);
};

struct CartesianTarget {
  Eigen::Vector3d x_d = Eigen::Vector3d::Zero();
  Eigen::Vector3d xd_d = Eigen::Vector3d::Zero();
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
  Eigen::Vector3d F_tip = Eigen::Vector3d::Zero();
};

namespace detail {

struct PointMass {
  int link = 0;
  double r = 0.0;
  double m = 0.0;
};

struct PitchChain {
  std::array<double, 3> L{};
  std::vector<PointMass> points;
  Eigen::Vector3d u;  // horizontal direction of the pitch plane
};

inline PitchChain pitch_chain(const ArmModel& model) {
  model.validate();
  PitchChain c;
  for (int i = 0; i < 3; ++i) {
    const Link& l = model.links[static_cast<std::size_t>(model.pitch_links[static_cast<std::size_t>(i)])];
    c.L[static_cast<std::size_t>(i)] = l.length_m;
    c.points.push_back({i, l.com_fraction * l.length_m, l.mass_kg});
  }
  for (const auto& a : model.attached) c.points.push_back({a.pitch_link, a.distance_m, a.mass_kg});
  if (model.tip_mass_kg > 0) c.points.push_back({2, c.L[2], model.tip_mass_kg});
  c.u = Eigen::Vector3d(std::cos(model.shoulder_yaw_rad), std::sin(model.shoulder_yaw_rad), 0.0);
  return c;
}

inline void check_dims(const Eigen::VectorXd& v, const char* what) {
  if (v.size() != 3) throw Error(std::string(what) + " must have 3 entries");
}

inline std::array<double, 3> absolute_angles(const Eigen::VectorXd& q) {
  return {q(0), q(0) + q(1), q(0) + q(1) + q(2)};
}

// Lever of point p on link l' <= p.link: full length below, r on its own link.
inline double lever(const PitchChain& c, const PointMass& p, int l) {
  return l < p.link ? c.L[static_cast<std::size_t>(l)] : p.r;
}

// In-plane position (horizontal, vertical) of a point on the chain.
inline Eigen::Vector2d planar_position(const PitchChain& c, const PointMass& p,
                                       const std::array<double, 3>& th) {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  for (int l = 0; l <= p.link; ++l) {
    double a = lever(c, p, l);
    x += a * Eigen::Vector2d(std::cos(th[static_cast<std::size_t>(l)]), std::sin(th[static_cast<std::size_t>(l)]));
  }
  return x;
}

// d(planar position)/dq, 2 x 3.
inline Eigen::Matrix<double, 2, 3> planar_jacobian(const PitchChain& c, const PointMass& p,
                                                   const std::array<double, 3>& th) {
  Eigen::Matrix<double, 2, 3> J = Eigen::Matrix<double, 2, 3>::Zero();
  for (int j = 0; j < 3; ++j)
    for (int l = j; l <= p.link; ++l) {
      double a = lever(c, p, l);
      double t = th[static_cast<std::size_t>(l)];
      J.col(j) += a * Eigen::Vector2d(-std::sin(t), std::cos(t));
    }
  return J;
}

// d^2(planar position)/dq_j dq_k.
inline Eigen::Vector2d planar_hessian(const PitchChain& c, const PointMass& p,
                                      const std::array<double, 3>& th, int j, int k) {
  Eigen::Vector2d h = Eigen::Vector2d::Zero();
  for (int l = std::max(j, k); l <= p.link; ++l) {
    double a = lever(c, p, l);
    double t = th[static_cast<std::size_t>(l)];
    h -= a * Eigen::Vector2d(std::cos(t), std::sin(t));
  }
  return h;
}

inline Eigen::Vector2d to_plane(const PitchChain& c, const Eigen::Vector3d& f) {
  return {f.dot(c.u), f.z()};
}

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace detail

/// Tip position in world coordinates.
inline Eigen::Vector3d forward_kinematics(const ArmModel& model, const Eigen::VectorXd& q) {
  detail::check_dims(q, "q");
  auto c = detail::pitch_chain(model);
  Eigen::Vector2d x = detail::planar_position(c, {2, c.L[2], 0.0}, detail::absolute_angles(q));
  return model.shoulder_position + x.x() * c.u + x.y() * Eigen::Vector3d::UnitZ();
}

/// Positional tip Jacobian in world coordinates (3 x 3).
inline Eigen::Matrix3d jacobian(const ArmModel& model, const Eigen::VectorXd& q) {
  detail::check_dims(q, "q");
  auto c = detail::pitch_chain(model);
  auto Jp = detail::planar_jacobian(c, {2, c.L[2], 0.0}, detail::absolute_angles(q));
  Eigen::Matrix3d J;
  for (int j = 0; j < 3; ++j) J.col(j) = Jp(0, j) * c.u + Jp(1, j) * Eigen::Vector3d::UnitZ();
  return J;
}

inline Eigen::Matrix3d mass_matrix(const ArmModel& model, const Eigen::VectorXd& q) {
  detail::check_dims(q, "q");
  auto c = detail::pitch_chain(model);
  auto th = detail::absolute_angles(q);
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  for (const auto& p : c.points) {
    auto J = detail::planar_jacobian(c, p, th);
    M += p.m * J.transpose() * J;
  }
  // Symmetric to the last bit.
  return (0.5 * (M + M.transpose())).eval();
}

/// dM/dq_k.
inline Eigen::Matrix3d mass_matrix_derivative(const ArmModel& model, const Eigen::VectorXd& q, int k) {
  detail::check_dims(q, "q");
  auto c = detail::pitch_chain(model);
  auto th = detail::absolute_angles(q);
  Eigen::Matrix3d dM = Eigen::Matrix3d::Zero();
  for (const auto& p : c.points) {
    auto J = detail::planar_jacobian(c, p, th);
    Eigen::Matrix<double, 2, 3> dJ;
    for (int j = 0; j < 3; ++j) dJ.col(j) = detail::planar_hessian(c, p, th, j, k);
    dM += p.m * (dJ.transpose() * J + J.transpose() * dJ);
  }
  return dM;
}

/// Coriolis matrix from Christoffel symbols, so that C(q, qd) qd is the
/// Coriolis and centripetal torque and dM/dt - 2C is skew-symmetric.
inline Eigen::Matrix3d coriolis_matrix(const ArmModel& model, const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& qd) {
  detail::check_dims(qd, "qd");
  std::array<Eigen::Matrix3d, 3> dM;
  for (int k = 0; k < 3; ++k) dM[static_cast<std::size_t>(k)] = mass_matrix_derivative(model, q, k);
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        const auto& Mk = dM[static_cast<std::size_t>(k)];
        const auto& Mj = dM[static_cast<std::size_t>(j)];
        const auto& Mi = dM[static_cast<std::size_t>(i)];
        C(i, j) += 0.5 * (Mk(i, j) + Mj(i, k) - Mi(j, k)) * qd(k);
      }
  return C;
}

/// Joint torques by recursive Newton-Euler: accelerations outward,
/// forces and moments inward. F_tip is the force the tip applies to the
/// environment, in world coordinates.
inline Eigen::Vector3d inverse_dynamics(const ArmModel& model, const JointState& s,
                                        const Eigen::Vector3d& F_tip = Eigen::Vector3d::Zero()) {
  detail::check_dims(s.q, "q");
  detail::check_dims(s.qd, "qd");
  detail::check_dims(s.qdd, "qdd");
  auto c = detail::pitch_chain(model);
  auto th = detail::absolute_angles(s.q);
  std::array<double, 3> w{}, dw{};
  std::array<Eigen::Vector2d, 4> origin, acc;
  origin[0] = acc[0] = Eigen::Vector2d::Zero();
  double wi = 0, dwi = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    wi += s.qd(static_cast<Eigen::Index>(i));
    dwi += s.qdd(static_cast<Eigen::Index>(i));
    w[i] = wi;
    dw[i] = dwi;
    Eigen::Vector2d e(std::cos(th[i]), std::sin(th[i]));
    Eigen::Vector2d n(-e.y(), e.x());
    origin[i + 1] = origin[i] + c.L[i] * e;
    acc[i + 1] = acc[i] + c.L[i] * (dw[i] * n - w[i] * w[i] * e);
  }
  const Eigen::Vector2d gvec(0.0, model.gravity);
  Eigen::Vector2d f = detail::to_plane(c, F_tip);
  double moment = 0;  // about the next joint outward, accumulated inward
  Eigen::Vector3d tau;
  for (int i = 2; i >= 0; --i) {
    auto ui = static_cast<std::size_t>(i);
    // Carry the outer load from joint i+1 to joint i.
    moment += detail::cross2(origin[ui + 1] - origin[ui], f);
    Eigen::Vector2d e(std::cos(th[ui]), std::sin(th[ui]));
    Eigen::Vector2d n(-e.y(), e.x());
    for (const auto& p : c.points) {
      if (p.link != i) continue;
      Eigen::Vector2d a = acc[ui] + p.r * (dw[ui] * n - w[ui] * w[ui] * e);
      Eigen::Vector2d load = p.m * (a + gvec);
      f += load;
      moment += detail::cross2(p.r * e, load);
    }
    tau(i) = moment;
  }
  return tau;
}

/// Joint torques holding the arm still: the recursion at rest, so the
/// static case of every torque law below reduces to it exactly.
inline Eigen::Vector3d gravity_torque(const ArmModel& model, const Eigen::VectorXd& q) {
  detail::check_dims(q, "q");
  JointState rest;
  rest.q = q;
  rest.qd.setZero();
  rest.qdd.setZero();
  return inverse_dynamics(model, rest);
}

/// The same torques assembled as M qdd + C qd + g + J^T F_tip.
inline Eigen::Vector3d inverse_dynamics_explicit(const ArmModel& model, const JointState& s,
                                                 const Eigen::Vector3d& F_tip = Eigen::Vector3d::Zero()) {
  detail::check_dims(s.qdd, "qdd");
  return mass_matrix(model, s.q) * s.qdd + coriolis_matrix(model, s.q, s.qd) * s.qd +
         gravity_torque(model, s.q) + jacobian(model, s.q).transpose() * F_tip;
}

/// Dynamics plus the Cartesian spring-damper:
/// M qdd + C qd + g + J^T (K (x_d - x) + D (xd_d - xd) + F_tip).
inline Eigen::Vector3d impedance_torque(const ArmModel& model, const JointState& s,
                                        const CartesianTarget& target) {
  auto asymmetric = [](const Eigen::Matrix3d& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
  };
  if (asymmetric(target.K) || target.K.llt().info() != Eigen::Success)
    throw Error("stiffness must be symmetric positive definite");
  if (asymmetric(target.D)) throw Error("damping must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(target.D);
  if (eig.eigenvalues().minCoeff() < -1e-12) throw Error("damping must be positive semidefinite");
  Eigen::Matrix3d J = jacobian(model, s.q);
  Eigen::Vector3d x = forward_kinematics(model, s.q);
  Eigen::Vector3d xd = J * s.qd;
  Eigen::Vector3d F = target.K * (target.x_d - x) + target.D * (target.xd_d - xd) + target.F_tip;
  return inverse_dynamics(model, s) + J.transpose() * F;
}

/// Gravity moments at full horizontal extension with a tip payload,
/// scaled by the safety factor; shoulder, elbow, wrist pitch.
inline Eigen::Vector3d static_worstcase_torques(const ArmModel& model, double payload_kg,
                                                double safety_factor) {
  if (payload_kg < 0) throw Error("negative payload");
  if (safety_factor < 1) throw Error("safety factor below 1");
  ArmModel loaded = model;
  loaded.tip_mass_kg = payload_kg;
  return safety_factor * gravity_torque(loaded, Eigen::Vector3d::Zero()).cwiseAbs();
}

struct PayloadEstimate {
  double mass_kg = 0.0;
  double residual_nm = 0.0;
  bool observable = true;
  bool anomaly = false;
};

/// Fits a tip point mass to the static torque excess over the unloaded
/// gravity torque. A residual above the threshold flags an anomaly such
/// as a collision or a load not at the tip.
inline PayloadEstimate estimate_payload(const ArmModel& model, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& tau_measured,
                                        double anomaly_threshold_nm = 1.0) {
  detail::check_dims(tau_measured, "tau");
  ArmModel empty = model;
  empty.tip_mass_kg = 0.0;
  Eigen::Vector3d excess = tau_measured - gravity_torque(empty, q);
  ArmModel unit = empty;
  unit.tip_mass_kg = 1.0;
  Eigen::Vector3d regressor = gravity_torque(unit, q) - gravity_torque(empty, q);
  PayloadEstimate e;
  if (regressor.norm() < 1e-6 * model.gravity) {
    e.observable = false;
    e.residual_nm = excess.norm();
    e.anomaly = e.residual_nm > anomaly_threshold_nm;
    return e;
  }
  e.mass_kg = regressor.dot(excess) / regressor.squaredNorm();
  e.residual_nm = (excess - e.mass_kg * regressor).norm();
  e.anomaly = e.residual_nm > anomaly_threshold_nm;
  return e;
}

/// Names of the joints whose angle (radians, in `model.limits` order)
/// lies outside the range of motion.
inline std::vector<std::string> joint_limit_violations(const ArmModel& model,
                                                       const std::vector<double>& q_rad) {
  if (q_rad.size() != model.limits.size()) throw Error("joint vector size does not match limits");
  std::vector<std::string> out;
  constexpr double kDeg = 180.0 / 3.14159265358979323846;
  for (std::size_t i = 0; i < q_rad.size(); ++i) {
    double d = q_rad[i] * kDeg;
    if (d < model.limits[i].min_deg - 1e-9 || d > model.limits[i].max_deg + 1e-9)
      out.push_back(model.limits[i].joint);
  }
  return out;
}

}  // namespace kcell

#endif  // KCELL_ARM_HPP_
