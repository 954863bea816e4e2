#include "rbdpipe/model_io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rbdpipe {
namespace {

using nlohmann::json;

Vec3 parse_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw ModelError(where + ": expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

JointKind parse_kind(const std::string& s, const std::string& link) {
  if (s == "revolute") return JointKind::Revolute;
  if (s == "prismatic") return JointKind::Prismatic;
  if (s == "helical") return JointKind::Helical;
  if (s == "cylindrical") return JointKind::Cylindrical;
  if (s == "planar") return JointKind::Planar;
  if (s == "spherical") return JointKind::Spherical;
  if (s == "translation3") return JointKind::Translation3;
  if (s == "floating") return JointKind::Floating;
  throw ModelError("link '" + link + "': unknown joint kind '" + s + "'");
}

RootMode parse_root_mode(const std::string& s) {
  if (s == "floating_split") return RootMode::FloatingSplit;
  if (s == "fixed_base") return RootMode::FixedBase;
  if (s == "state_injected") return RootMode::StateInjected;
  if (s == "ignored") return RootMode::Ignored;
  throw ModelError("unknown root_mode '" + s + "'");
}

/// Snap an axis that is numerically a signed coordinate axis to the exact
/// one-hot form, so revolute/prismatic subspaces come out exactly one-hot.
Vec3 normalize_axis(Vec3 a, const std::string& link) {
  const double n = a.norm();
  if (n < 1e-12) throw ModelError("link '" + link + "': joint axis is zero");
  a /= n;
  for (int k = 0; k < 3; ++k) {
    for (double s : {1.0, -1.0}) {
      if ((a - s * Vec3::Unit(k)).norm() < 1e-9) return s * Vec3::Unit(k);
    }
  }
  return a;
}

/// Rotation from an xform spec: either "rpy" (fixed-axis XYZ, URDF
/// convention) or "R" (9 entries row-major), both mapping joint-frame
/// vectors to parent-frame vectors. Stored as the coordinate transform
/// (its transpose).
Mat3 parse_rotation(const json& x, const std::string& link) {
  Mat3 R_op = Mat3::Identity();
  if (x.contains("rpy")) {
    const Vec3 rpy = parse_vec3(x["rpy"], "link '" + link + "' xform.rpy");
    R_op = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
            Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
               .toRotationMatrix();
  } else if (x.contains("R")) {
    const auto& r = x["R"];
    if (!r.is_array() || r.size() != 9) {
      throw ModelError("link '" + link + "': xform.R must have 9 entries");
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) R_op(i, j) = r[3 * i + j].get<double>();
    }
    if ((R_op * R_op.transpose() - Mat3::Identity()).norm() > 1e-9) {
      throw ModelError("link '" + link + "': xform.R is not orthonormal");
    }
  }
  return R_op.transpose();
}

}  // namespace

RobotModel parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("model document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("links") || !doc["links"].is_array()) {
    throw ModelError("model document must be an object with a 'links' array");
  }

  RobotModel model;
  model.name = doc.value("name", "unnamed");
  if (doc.contains("gravity")) model.gravity = parse_vec3(doc["gravity"], "gravity");
  model.root_mode = parse_root_mode(doc.value("root_mode", "fixed_base"));

  struct RawLink {
    std::string name, parent;
    JointType joint;
    SpatialTransform xform;
    SpatialInertia inertia;
    bool is_virtual{false};
  };
  std::vector<RawLink> raw;
  std::map<std::string, int> by_name;

  for (const auto& lj : doc["links"]) {
    RawLink l;
    if (!lj.contains("name") || !lj["name"].is_string()) {
      throw ModelError("every link needs a string 'name'");
    }
    l.name = lj["name"].get<std::string>();
    if (l.name == "world") throw ModelError("'world' is a reserved link name");
    if (by_name.count(l.name)) throw ModelError("duplicate link name '" + l.name + "'");
    l.parent = lj.value("parent", "world");
    if (l.parent == l.name) {
      throw ModelError("link '" + l.name + "': cyclic parent (link is its own parent)");
    }

    if (lj.contains("joint")) {
      const auto& jj = lj["joint"];
      l.joint.kind = parse_kind(jj.value("kind", "revolute"), l.name);
      if (jj.contains("axis")) {
        l.joint.axis = normalize_axis(parse_vec3(jj["axis"], "link '" + l.name + "' axis"), l.name);
      }
      l.joint.pitch = jj.value("pitch", 0.0);
    } else if (model.root_mode == RootMode::FloatingSplit && l.parent == "world") {
      l.joint.kind = JointKind::Floating;
    } else {
      throw ModelError("link '" + l.name + "': missing joint");
    }

    if (lj.contains("xform")) {
      const auto& xj = lj["xform"];
      l.xform.R = parse_rotation(xj, l.name);
      if (xj.contains("xyz")) l.xform.t = parse_vec3(xj["xyz"], "link '" + l.name + "' xform.xyz");
    }

    if (!lj.contains("inertia")) throw ModelError("link '" + l.name + "': missing inertia");
    const auto& ij = lj["inertia"];
    const double mass = ij.value("mass", 0.0);
    if (!(mass > 0.0)) {
      throw ModelError("link '" + l.name + "': mass must be positive");
    }
    Vec3 com = Vec3::Zero();
    if (ij.contains("com")) com = parse_vec3(ij["com"], "link '" + l.name + "' com");
    Mat3 I_com;
    const double ixx = ij.value("ixx", 0.0), iyy = ij.value("iyy", 0.0), izz = ij.value("izz", 0.0);
    const double ixy = ij.value("ixy", 0.0), ixz = ij.value("ixz", 0.0), iyz = ij.value("iyz", 0.0);
    I_com << ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz;
    l.inertia = SpatialInertia::from_com(mass, com, I_com);

    by_name[l.name] = static_cast<int>(raw.size());
    raw.push_back(std::move(l));
  }
  if (raw.empty()) throw ModelError("model has no links");

  // Resolve parents and check reachability (catches cycles and typos).
  std::vector<int> parent_idx(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].parent == "world") {
      parent_idx[i] = -1;
    } else {
      auto it = by_name.find(raw[i].parent);
      if (it == by_name.end()) {
        throw ModelError("link '" + raw[i].name + "': unknown parent '" + raw[i].parent + "'");
      }
      parent_idx[i] = it->second;
    }
  }

  // Topological re-indexing (stable within a level by file order).
  std::vector<int> order;
  std::vector<bool> placed(raw.size(), false);
  for (size_t pass = 0; pass <= raw.size(); ++pass) {
    bool progress = false;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (placed[i]) continue;
      if (parent_idx[i] < 0 || placed[parent_idx[i]]) {
        placed[i] = true;
        order.push_back(static_cast<int>(i));
        progress = true;
      }
    }
    if (order.size() == raw.size()) break;
    if (!progress) {
      for (size_t i = 0; i < raw.size(); ++i) {
        if (!placed[i]) {
          throw ModelError("link '" + raw[i].name + "': cyclic parent chain");
        }
      }
    }
  }

  if (model.root_mode == RootMode::FloatingSplit) {
    int world_roots = 0;
    for (int p : parent_idx) world_roots += (p < 0);
    if (world_roots != 1) {
      throw ModelError("floating_split models need exactly one world-attached link");
    }
  }

  std::vector<int> new_index(raw.size());
  for (size_t k = 0; k < order.size(); ++k) new_index[order[k]] = static_cast<int>(k);
  for (int old_i : order) {
    RawLink& l = raw[old_i];
    const bool is_base = parent_idx[old_i] < 0;
    if (l.joint.kind == JointKind::Floating &&
        !(model.root_mode == RootMode::FloatingSplit && is_base)) {
      throw ModelError("link '" + l.name + "': floating joints are only valid at a floating base");
    }
    model.parent.push_back(is_base ? -1 : new_index[parent_idx[old_i]]);
    model.joints.push_back(l.joint);
    model.S.push_back(joint_motion_subspace(l.joint));
    model.fixed_xform.push_back(l.xform);
    model.inertia.push_back(l.inertia);
    model.link_names.push_back(l.name);
    model.is_virtual.push_back(l.joint.kind == JointKind::Floating);
  }

  model.finalize();
  return model;
}

RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace rbdpipe
