#pragma once

#include "enfo/dataset.hpp"
#include "enfo/nu_method.hpp"

#include <json.hpp>

#include <filesystem>

namespace enfo {

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Standardization& s);
Standardization standardization_from_json(const nlohmann::json& j);

/// {schema_version, family, bandwidth, nu, iterations, support_points,
/// alpha, standardization}. Doubles are written in shortest round-trip form.
nlohmann::json to_json(const NuMethodModel& model);
NuMethodModel nu_model_from_json(const nlohmann::json& j);

void save_model(const NuMethodModel& model, const std::filesystem::path& path);
NuMethodModel load_model(const std::filesystem::path& path);

}  // namespace enfo
