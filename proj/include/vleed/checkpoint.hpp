#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vleed/model.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

// Binary container shared by all on-disk artifacts:
//   magic bytes (6 ASCII chars, e.g. "VLEED1")
//   u64 LE metadata byte length, UTF-8 JSON metadata
//   u32 LE tensor count, then per tensor:
//     u32 LE name length, name bytes, u32 LE rank, u64 LE dims,
//     f64 LE values (raw bit round-trip, so save/load is bit-exact)
struct Container {
    std::string magic;
    nlohmann::ordered_json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_container(const std::string& path, const Container& c);
// Throws FormatError (with byte offset on truncation) or IoError.
Container read_container(const std::string& path, const std::string& expected_magic);

inline constexpr const char* kModelMagic = "VLEED1";

nlohmann::ordered_json config_to_json(const VleedConfig& c);
VleedConfig config_from_json(const nlohmann::ordered_json& j);

void save_model(const std::string& path, const VleedModel& m);
VleedModel load_model(const std::string& path);

}  // namespace vleed
