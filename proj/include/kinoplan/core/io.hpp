#pragma once

// File formats. All text formats print doubles in shortest round-trip form,
// so write -> read -> write reproduces the bytes exactly. See docs/formats.md.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kinoplan/core/pose.hpp"

namespace kinoplan::io {

using Json = nlohmann::json;

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& contents);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

// Skeleton JSON.
Json skeleton_to_json(const Skeleton& skeleton);
Skeleton skeleton_from_json(const Json& doc);
std::string write_skeleton(const Skeleton& skeleton);
Skeleton read_skeleton(const std::string& text);
Skeleton load_skeleton(const std::filesystem::path& path);
void save_skeleton(const std::filesystem::path& path, const Skeleton& skeleton);

// Motion: line-oriented text, plus a little-endian binary variant.
std::string write_motion_text(const Motion& motion);
Motion read_motion_text(const std::string& text);
std::vector<std::uint8_t> write_motion_binary(const Motion& motion);
Motion read_motion_binary(const std::vector<std::uint8_t>& bytes);
/// Picks the binary variant for the ".bin" extension, text otherwise.
Motion load_motion(const std::filesystem::path& path);
void save_motion(const std::filesystem::path& path, const Motion& motion);

// Keyframe plan JSON.
Json keyframe_to_json(const Keyframe& key);
Keyframe keyframe_from_json(const Json& doc, KeyframeMode mode);
Json plan_to_json(const KeyframePlan& plan);
KeyframePlan plan_from_json(const Json& doc);
std::string write_plan(const KeyframePlan& plan);
KeyframePlan read_plan(const std::string& text);
KeyframePlan load_plan(const std::filesystem::path& path);
void save_plan(const std::filesystem::path& path, const KeyframePlan& plan);

// Named dense matrices in one text document.
using NamedMatrix = std::pair<std::string, Eigen::MatrixXd>;
std::string write_matrices(const std::vector<NamedMatrix>& matrices);
std::vector<NamedMatrix> read_matrices(const std::string& text);
/// Throws FormatError when the name is missing.
const Eigen::MatrixXd& find_matrix(const std::vector<NamedMatrix>& matrices, const std::string& name);

}  // namespace kinoplan::io
