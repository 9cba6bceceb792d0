#include "kinoplan/core/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kinoplan/core/error.hpp"

namespace kinoplan {

Skeleton::Skeleton(std::vector<std::string> names, std::vector<int> parents,
                   std::vector<Vec3> offsets, std::vector<std::size_t> key_joints)
    : names_(std::move(names)),
      parents_(std::move(parents)),
      offsets_(std::move(offsets)),
      key_joints_(std::move(key_joints)) {
  const std::size_t n = names_.size();
  if (n == 0) throw ValidationError("skeleton has no joints");
  if (parents_.size() != n || offsets_.size() != n)
    throw ValidationError("skeleton arrays have mismatched lengths");
  if (parents_[0] != -1) throw ValidationError("joint 0 must be the root (parent -1)");
  for (std::size_t i = 1; i < n; ++i) {
    if (parents_[i] < 0 || static_cast<std::size_t>(parents_[i]) >= i)
      throw ValidationError("joint '" + names_[i] + "' must have a parent with a smaller index");
  }
  for (const auto& o : offsets_)
    if (!o.allFinite()) throw ValidationError("non-finite rest offset");
  std::set<std::string> unique_names(names_.begin(), names_.end());
  if (unique_names.size() != n) throw ValidationError("duplicate joint names");
  if (key_joints_.empty()) throw ValidationError("skeleton lists no key joints");
  if (key_joints_.size() > kKeyJointCount) throw ValidationError("at most five key joints");
  std::set<std::size_t> unique_keys;
  for (std::size_t k : key_joints_) {
    if (k >= n) throw ValidationError("key joint index out of range");
    unique_keys.insert(k);
  }
  if (unique_keys.size() != key_joints_.size()) throw ValidationError("key joints must be distinct");
}

Skeleton Skeleton::standard() {
  // SMPL neutral joint offsets, Y-up, +X is the body's left.
  std::vector<std::string> names = {
      "pelvis",       "left_hip",       "right_hip",      "spine1",     "left_knee",
      "right_knee",   "spine2",         "left_ankle",     "right_ankle", "spine3",
      "left_foot",    "right_foot",     "neck",           "left_collar", "right_collar",
      "head",         "left_shoulder",  "right_shoulder", "left_elbow", "right_elbow",
      "left_wrist",   "right_wrist"};
  std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7,
                              8,  9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
  std::vector<Vec3> offsets = {
      {0.0, 0.0, 0.0},          {0.0586, -0.0823, -0.0177}, {-0.0603, -0.0905, -0.0135},
      {0.0044, 0.1244, -0.0384}, {0.0435, -0.3865, 0.0080},  {-0.0433, -0.3831, -0.0048},
      {0.0045, 0.1380, 0.0268},  {-0.0148, -0.4269, -0.0374}, {0.0191, -0.4200, -0.0346},
      {-0.0023, 0.0560, 0.0029}, {0.0411, -0.0603, 0.1220},  {-0.0348, -0.0621, 0.1303},
      {-0.0134, 0.2116, -0.0335}, {0.0717, 0.1140, -0.0189}, {-0.0830, 0.1125, -0.0237},
      {0.0101, 0.0889, 0.0504},  {0.1229, 0.0452, -0.0190},  {-0.1132, 0.0469, -0.0085},
      {0.2553, -0.0156, -0.0229}, {-0.2601, -0.0144, -0.0313}, {0.2657, 0.0127, -0.0073},
      {-0.2691, -0.0068, -0.0060}};
  return Skeleton(std::move(names), std::move(parents), std::move(offsets), {0, 20, 21, 7, 8});
}

Skeleton Skeleton::planar_chain(std::size_t joints, double link) {
  if (joints < 2) throw ValidationError("chain needs at least two joints");
  std::vector<std::string> names;
  std::vector<int> parents;
  std::vector<Vec3> offsets;
  std::vector<std::size_t> keys;
  for (std::size_t i = 0; i < joints; ++i) {
    names.push_back("link" + std::to_string(i));
    parents.push_back(static_cast<int>(i) - 1);
    offsets.push_back(i == 0 ? Vec3::Zero() : Vec3(link, 0.0, 0.0));
    if (keys.size() < kKeyJointCount) keys.push_back(i);
  }
  return Skeleton(std::move(names), std::move(parents), std::move(offsets), std::move(keys));
}

std::size_t Skeleton::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError("unknown joint '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

bool Skeleton::is_standard() const {
  return names_.size() == kStandardJointCount && key_joints_.size() == kKeyJointCount;
}

}  // namespace kinoplan
